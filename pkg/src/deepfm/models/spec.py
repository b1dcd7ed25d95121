"""Model identifiers and the hyper-parameter record shared by the zoo."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigurationError
from ..numerics import ACTIVATIONS

# kind -> (wide part, deep part, product)
KIND_TABLE = {
    "lr": ("lr", None, None),
    "poly2": ("poly2", None, None),
    "fm": ("fm", None, None),
    "dnn": (None, "dnn", None),
    "fnn": (None, "dnn", None),
    "ipnn": (None, "pnn", "inner"),
    "opnn": (None, "pnn", "outer"),
    "pnn_star": (None, "pnn", "both"),
    "lr_dnn": ("lr", "dnn", None),
    "fm_dnn": ("fm", "dnn", None),
    "deepfm_d": ("fm", "dnn", None),
    "deepfm_ip": ("fm", "pnn", "inner"),
    "deepfm_op": ("fm", "pnn", "outer"),
    "deepfm_star": ("fm", "pnn", "both"),
}
KINDS = tuple(KIND_TABLE)
DEEPFM_KINDS = ("deepfm_d", "deepfm_ip", "deepfm_op", "deepfm_star")
WIDE_KINDS = ("lr", "poly2", "fm")
PRODUCTS = ("inner", "outer", "both")


@dataclass
class ModelSpec:
    kind: str
    k: int = 10
    hidden: tuple[int, ...] = ()
    activation: str = "relu"
    keep_prob: float = 1.0
    product: str | None = None
    use_layer_norm: bool = False
    shared_embedding: bool | None = None
    outer_exact: bool = False
    poly2_bits: int = 20
    init_std: float = 0.01
    ln_epsilon: float = 1e-5

    def __post_init__(self):
        if self.kind not in KIND_TABLE:
            raise ConfigurationError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        self.hidden = tuple(int(h) for h in self.hidden)
        wide, deep, product = KIND_TABLE[self.kind]
        if self.product is None:
            self.product = product
        elif self.product != product:
            raise ConfigurationError(f"{self.kind} does not take product={self.product!r}")
        shared = self.kind in DEEPFM_KINDS
        if self.shared_embedding is None:
            self.shared_embedding = shared
        elif self.shared_embedding != shared:
            raise ConfigurationError(
                f"{self.kind}: shared_embedding must be {shared} (only DeepFM models share V)"
            )
        if self.k < 1:
            raise ConfigurationError(f"embedding size k must be >= 1, got {self.k}")
        if deep is None:
            if self.hidden:
                raise ConfigurationError(f"{self.kind} is a wide model and takes no hidden layers")
            if self.use_layer_norm:
                raise ConfigurationError(f"{self.kind} has no hidden layers to normalize")
        else:
            if not self.hidden or min(self.hidden) < 1:
                raise ConfigurationError(f"{self.kind} needs at least one positive hidden width")
            if self.activation not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {self.activation!r}")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigurationError(f"keep_prob must lie in (0, 1], got {self.keep_prob}")
        if not 1 <= self.poly2_bits <= 32:
            raise ConfigurationError("poly2_bits must lie in [1, 32]")

    @property
    def wide(self) -> str | None:
        return KIND_TABLE[self.kind][0]

    @property
    def deep(self) -> str | None:
        return KIND_TABLE[self.kind][1]

    @property
    def deep_width(self) -> int:
        """Embedding width fed to the deep part: k when V is shared, else k + 1."""
        return self.k if self.shared_embedding else self.k + 1

    @property
    def deep_table(self) -> str:
        return "V" if self.shared_embedding else "E"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown model spec keys: {sorted(unknown)}")
        return cls(**d)
