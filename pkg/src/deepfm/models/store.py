"""Parameter and gradient containers plus the binary checkpoint format."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DimensionError
from .spec import ModelSpec

# tensors indexed by global feature id; gradients on them are row-sparse
SPARSE_TENSORS = ("w", "V", "E", "pair_w")
MAGIC = b"DFMCKPT1"


class ParameterStore:
    """Named float64 tensors of one model, kept in declaration order."""

    def __init__(self, tensors: dict[str, np.ndarray] | None = None):
        self.tensors: dict[str, np.ndarray] = {}
        for name, t in (tensors or {}).items():
            self.tensors[name] = np.asarray(t, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value) -> None:
        self.tensors[name] = np.asarray(value, dtype=np.float64)

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self):
        return iter(self.tensors)

    def names(self) -> list[str]:
        return list(self.tensors)

    def items(self):
        return self.tensors.items()

    def copy(self) -> "ParameterStore":
        return ParameterStore({n: t.copy() for n, t in self.tensors.items()})

    def equal(self, other: "ParameterStore") -> bool:
        return self.names() == other.names() and all(
            np.array_equal(self[n], other[n]) for n in self.names()
        )

    @property
    def total_features(self) -> int:
        for name in ("w", "V", "E"):
            if name in self.tensors:
                return self.tensors[name].shape[0]
        raise KeyError("store holds no per-feature tensor")

    def nonfinite(self) -> str | None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                return name
        return None


class GradientSet:
    """Gradients mirroring a :class:`ParameterStore` tensor for tensor.

    ``rows`` records which rows of the per-feature tensors were touched so
    that lazy optimizers and the L2 penalty can skip the rest.
    """

    def __init__(self, tensors: dict[str, np.ndarray], rows: dict[str, np.ndarray] | None = None):
        self.tensors = tensors
        self.rows = rows if rows is not None else {}

    @classmethod
    def zeros_like(cls, store: ParameterStore) -> "GradientSet":
        return cls({n: np.zeros_like(t) for n, t in store.items()})

    def __getitem__(self, name):
        return self.tensors[name]

    def __setitem__(self, name, value):
        self.tensors[name] = value

    def names(self):
        return list(self.tensors)

    def touch(self, name: str, ids: np.ndarray) -> None:
        new = np.unique(ids)
        old = self.rows.get(name)
        self.rows[name] = new if old is None else np.union1d(old, new)

    def active_rows(self, name: str) -> np.ndarray | None:
        return self.rows.get(name)

    def iadd(self, other: "GradientSet") -> "GradientSet":
        for n, g in other.tensors.items():
            self.tensors[n] += g
        for n, r in other.rows.items():
            self.touch(n, r)
        return self

    def scale(self, c: float) -> "GradientSet":
        for g in self.tensors.values():
            g *= c
        return self

    def copy(self) -> "GradientSet":
        return GradientSet(
            {n: g.copy() for n, g in self.tensors.items()}, {n: r.copy() for n, r in self.rows.items()}
        )

    def check_shapes(self, store: ParameterStore) -> None:
        if self.names() != store.names():
            raise DimensionError(f"gradient tensors {self.names()} != store tensors {store.names()}")
        for n in self.names():
            if self[n].shape != store[n].shape:
                raise DimensionError(f"gradient {n}{self[n].shape} != parameter {n}{store[n].shape}")

    def nonfinite(self) -> str | None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                return name
        return None


def save_checkpoint(path, spec: ModelSpec, store: ParameterStore, m: int) -> None:
    """Write ``magic | header length | JSON header | float64 tensors``.

    A JSON sidecar ``<path>.json`` mirrors the model spec.
    """
    path = Path(path)
    header = {
        "spec": spec.to_dict(),
        "m": m,
        "tensors": [[n, list(t.shape)] for n, t in store.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for t in store.tensors.values():
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())
    Path(str(path) + ".json").write_text(json.dumps(spec.to_dict(), indent=1, sort_keys=True))


def load_checkpoint(path) -> tuple[ModelSpec, ParameterStore, int]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read checkpoint {path}: {exc.strerror}") from exc
    if data[:8] != MAGIC:
        raise ConfigurationError(f"{path} is not a checkpoint file")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + n])
    offset = 12 + n
    tensors = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        tensors[name] = arr.reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise ConfigurationError(f"{path}: trailing or missing tensor bytes")
    return ModelSpec.from_dict(header["spec"]), ParameterStore(tensors), int(header["m"])
