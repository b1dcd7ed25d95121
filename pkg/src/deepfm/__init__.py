"""DeepFM and baseline CTR models trained from scratch on sparse field data."""

__version__ = "0.1.0"
