"""Offline evaluation: AUC, Logloss, speed-up rates and hyper-parameter sweeps."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigurationError, ParameterError, UndefinedMetricError
from .featurespace import Dataset
from .models import ModelSpec
from .models.spec import WIDE_KINDS


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative.

    Ties count one half. Computed from average ranks in O(n log n).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def dataset_logloss(labels, probs) -> float:
    """Mean per-instance cross-entropy with probabilities clipped to [1e-12, 1 - 1e-12]."""
    from .training import logloss

    labels = np.asarray(labels, dtype=np.float64)
    if labels.size == 0:
        raise UndefinedMetricError("Logloss of an empty set")
    return float(logloss(labels, probs).mean())


def speedup_rate(time_b: float, time_a: float) -> float:
    """Speed-up of strategy A over baseline B: ``time_b / time_a``."""
    if time_b <= 0 or time_a <= 0:
        raise ParameterError(f"times must be positive, got {time_b} and {time_a}")
    return time_b / time_a


SWEEP_AXES = ("activation", "dropout", "neurons_per_layer", "hidden_layers", "network_shape")
SHAPES = ("constant", "increasing", "decreasing", "diamond")
DEFAULT_VALUES = {
    "activation": ["relu", "tanh"],
    "dropout": [1.0, 0.9, 0.8, 0.7, 0.6, 0.5],
    "neurons_per_layer": [100, 200, 400, 800],
    "hidden_layers": [1, 3, 5, 7],
    "network_shape": list(SHAPES),
}


@dataclass
class SweepAxis:
    axis: str
    values: list = field(default_factory=list)

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigurationError(f"unknown sweep axis {self.axis!r}; expected one of {SWEEP_AXES}")
        if not self.values:
            self.values = list(DEFAULT_VALUES[self.axis])
        if self.axis == "network_shape":
            bad = [v for v in self.values if v not in SHAPES]
            if bad:
                raise ConfigurationError(f"unknown network shapes {bad}; expected {SHAPES}")


def shape_layouts(total: int, n_layers: int) -> dict[str, list[int]]:
    """Hidden widths for each network shape with fixed depth and neuron budget.

    Widths are proportional to 1:1:1, 1:2:3, 3:2:1 and 1:2:1 patterns
    (generalised to any depth); rounding leftovers go to the middle layer.
    """
    if n_layers < 1 or total < n_layers:
        raise ParameterError(f"cannot spread {total} neurons over {n_layers} layers")
    weights = {
        "constant": [1] * n_layers,
        "increasing": list(range(1, n_layers + 1)),
        "decreasing": list(range(n_layers, 0, -1)),
        "diamond": [min(i + 1, n_layers - i) for i in range(n_layers)],
    }
    out = {}
    for shape, w in weights.items():
        widths = [total * x // sum(w) for x in w]
        widths[n_layers // 2] += total - sum(widths)
        out[shape] = widths
    return out


def apply_axis(base: ModelSpec, axis: str, value) -> ModelSpec:
    if base.kind in WIDE_KINDS:
        raise ConfigurationError(f"sweep axis {axis!r} does not apply to wide model {base.kind}")
    d = base.to_dict()
    hidden = list(base.hidden)
    if axis == "activation":
        d["activation"] = value
    elif axis == "dropout":
        d["keep_prob"] = float(value)
    elif axis == "neurons_per_layer":
        d["hidden"] = [int(value)] * len(hidden)
    elif axis == "hidden_layers":
        d["hidden"] = [hidden[0]] * int(value)
    elif axis == "network_shape":
        d["hidden"] = shape_layouts(sum(hidden), len(hidden))[value]
    else:
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    return ModelSpec.from_dict(d)


@dataclass
class SweepProtocol:
    train: Dataset
    test: Dataset
    config: object
    d: int


def sweep(base_spec: ModelSpec, axis: SweepAxis, protocol: SweepProtocol) -> list[dict]:
    """Train one model per axis value with the same seed and epoch budget."""
    from .training import evaluate, fit

    specs = [(v, apply_axis(base_spec, axis.axis, v)) for v in axis.values]
    rows = []
    for value, spec in specs:
        t0 = time.perf_counter()
        result = fit(spec, protocol.train, protocol.config, protocol.d)
        scores = evaluate(result.model, result.store, protocol.test)
        rows.append({
            "axis_value": value,
            "hidden": "-".join(str(h) for h in spec.hidden),
            "auc": scores["auc"],
            "logloss": scores["logloss"],
            "wall_time_s": time.perf_counter() - t0,
        })
    return rows
