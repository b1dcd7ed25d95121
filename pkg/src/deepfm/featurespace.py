"""Field-grouped sparse inputs with global feature identifiers.

Raw records are header-less delimited text: the 0/1 label first, then one
token per field. Every field contributes exactly one active feature, so an
encoded instance is a pair of length-``m`` arrays: global feature ids and
feature values.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    MalformedInputError,
    ParameterError,
    ParseError,
    UnknownTokenError,
)

CATEGORICAL = "categorical"
NUMERICAL = "numerical"
RETAIN = "retain"
DISCRETIZE = "discretize"
UNKNOWN_TOKEN = "<UNK>"


@dataclass
class FieldSpec:
    name: str
    kind: str
    cardinality: int
    vocab: dict[str, int] = field(default_factory=dict)
    value_policy: str | None = None
    boundaries: list[float] = field(default_factory=list)
    mean: float = 0.0
    std: float = 1.0
    minimum: float = 0.0
    maximum: float = 0.0
    standardize: bool = False
    reserve_unknown: bool = False

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERICAL):
            raise ConfigurationError(f"field {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERICAL and self.value_policy not in (RETAIN, DISCRETIZE):
            raise ConfigurationError(
                f"field {self.name!r}: numerical policy must be retain or discretize"
            )
        if any(a >= b for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise ConfigurationError(f"field {self.name!r}: boundaries must be strictly increasing")

    @property
    def unknown_index(self) -> int | None:
        if self.kind == CATEGORICAL and self.reserve_unknown:
            return self.cardinality - 1
        return None

    def local_index(self, token: str, line=None) -> tuple[int, float]:
        """Map one raw token to ``(local index, feature value)``."""
        if self.kind == CATEGORICAL:
            j = self.vocab.get(token)
            if j is None:
                if not self.reserve_unknown:
                    raise UnknownTokenError(f"field {self.name!r}: unseen token {token!r}")
                j = self.cardinality - 1
            return j, 1.0
        x = _parse_float(token, self.name, line)
        if self.value_policy == DISCRETIZE:
            return bisect.bisect_right(self.boundaries, x), 1.0
        if self.standardize:
            x = (x - self.mean) / self.std
        return 0, x

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "cardinality": self.cardinality}
        if self.kind == CATEGORICAL:
            d["vocab"] = self.vocab
            d["reserve_unknown"] = self.reserve_unknown
        else:
            d.update(
                value_policy=self.value_policy,
                boundaries=list(self.boundaries),
                mean=self.mean,
                std=self.std,
                minimum=self.minimum,
                maximum=self.maximum,
                standardize=self.standardize,
            )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSpec":
        return cls(**d)


def _parse_float(token: str, name: str, line=None) -> float:
    try:
        x = float(token)
    except ValueError:
        raise ParseError(f"field {name!r}: cannot parse {token!r} as a number", line=line) from None
    if not math.isfinite(x):
        raise ParseError(f"field {name!r}: non-finite value {token!r}", line=line)
    return x


class FeatureSchema:
    """Ordered field specs plus the global-ID layout derived from them."""

    def __init__(self, fields: Sequence[FieldSpec]):
        self.fields = list(fields)
        self.cardinalities = [f.cardinality for f in self.fields]
        self.offsets = np.concatenate([[0], np.cumsum(self.cardinalities)]).astype(np.int64)
        self.total_features = int(self.offsets[-1])

    @property
    def m(self) -> int:
        return len(self.fields)

    def field_range(self, i: int) -> tuple[int, int]:
        """Half-open global-ID range of 0-based field ``i``."""
        return int(self.offsets[i]), int(self.offsets[i + 1])

    def global_id(self, i: int, j: int) -> int:
        """Global ID of local feature ``j`` in 0-based field ``i``."""
        if not 0 <= i < self.m:
            raise IndexError(f"field index {i} outside [0, {self.m})")
        return global_id(self.cardinalities, i + 1, j)

    def field_of(self, gid: int) -> int:
        return int(np.searchsorted(self.offsets, gid, side="right") - 1)

    def to_dict(self) -> dict:
        return {"fields": [f.to_dict() for f in self.fields], "total_features": self.total_features}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        schema = cls([FieldSpec.from_dict(f) for f in d["fields"]])
        if "total_features" in d and d["total_features"] != schema.total_features:
            raise ConfigurationError("schema total_features disagrees with field cardinalities")
        return schema

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise ConfigurationError(f"cannot read schema {path}: {exc}") from exc

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, FeatureSchema) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"FeatureSchema(m={self.m}, total_features={self.total_features})"


def global_id(cardinalities: Sequence[int], i: int, j: int) -> int:
    """GlobalID(i, j) = n_1 + ... + n_{i-1} + j, with 1-based field ``i``."""
    if not 1 <= i <= len(cardinalities):
        raise IndexError(f"field {i} outside [1, {len(cardinalities)}]")
    if not 0 <= j < cardinalities[i - 1]:
        raise IndexError(f"local index {j} outside [0, {cardinalities[i - 1]}) for field {i}")
    return int(sum(cardinalities[: i - 1]) + j)


def build_schema(
    raw_records: Iterable[Sequence[str]],
    field_kinds: Sequence[str],
    numeric_policy: str = RETAIN,
    n_buckets: int = 10,
    boundaries: dict[int, Sequence[float]] | None = None,
    names: Sequence[str] | None = None,
    reserve_unknown: bool = True,
    standardize: bool = True,
) -> FeatureSchema:
    """Scan field-token records once and freeze vocabularies and statistics.

    ``raw_records`` yields the field tokens only (no label). Discretized
    fields use ``boundaries[i]`` when given, otherwise quantile cut points.
    """
    m = len(field_kinds)
    for kind in field_kinds:
        if kind not in (CATEGORICAL, NUMERICAL):
            raise ConfigurationError(f"unknown field kind {kind!r}")
    if numeric_policy not in (RETAIN, DISCRETIZE):
        raise ConfigurationError(f"unknown numeric policy {numeric_policy!r}")
    boundaries = dict(boundaries or {})
    names = list(names) if names is not None else [f"f{i}" for i in range(m)]

    vocabs: list[dict[str, int]] = [{} for _ in range(m)]
    numbers: list[list[float]] = [[] for _ in range(m)]
    for line, tokens in enumerate(raw_records, start=1):
        if len(tokens) != m:
            raise MalformedInputError(f"expected {m} fields, found {len(tokens)}", line=line)
        for i, (kind, tok) in enumerate(zip(field_kinds, tokens)):
            if kind == CATEGORICAL:
                vocab = vocabs[i]
                if tok not in vocab:
                    vocab[tok] = len(vocab)
            else:
                numbers[i].append(_parse_float(tok, names[i], line))

    fields = []
    for i, kind in enumerate(field_kinds):
        if kind == CATEGORICAL:
            n = len(vocabs[i]) + (1 if reserve_unknown else 0)
            fields.append(
                FieldSpec(names[i], kind, n, vocab=vocabs[i], reserve_unknown=reserve_unknown)
            )
            continue
        xs = np.asarray(numbers[i], dtype=np.float64)
        stats = dict(
            mean=float(xs.mean()) if xs.size else 0.0,
            std=float(xs.std()) if xs.size and xs.std() > 0 else 1.0,
            minimum=float(xs.min()) if xs.size else 0.0,
            maximum=float(xs.max()) if xs.size else 0.0,
        )
        if numeric_policy == DISCRETIZE or i in boundaries:
            if i in boundaries:
                cuts = [float(b) for b in boundaries[i]]
            elif xs.size:
                qs = np.quantile(xs, np.linspace(0, 1, n_buckets + 1)[1:-1])
                cuts = [float(b) for b in np.unique(qs)]
            else:
                cuts = []
            fields.append(
                FieldSpec(names[i], kind, len(cuts) + 1, value_policy=DISCRETIZE, boundaries=cuts, **stats)
            )
        else:
            fields.append(
                FieldSpec(names[i], kind, 1, value_policy=RETAIN, standardize=standardize, **stats)
            )
    return FeatureSchema(fields)


@dataclass(frozen=True)
class SparseInstance:
    ids: tuple[int, ...]
    values: tuple[float, ...]
    label: int = 0


def encode(schema: FeatureSchema, tokens: Sequence[str], label: int = 0, line=None) -> SparseInstance:
    """Encode one record's field tokens.

    Values are rounded through float32 so that online mapping and the
    offline binary index produce identical instances.
    """
    if len(tokens) != schema.m:
        raise MalformedInputError(f"expected {schema.m} fields, found {len(tokens)}", line=line)
    ids, values = [], []
    for off, spec, tok in zip(schema.offsets, schema.fields, tokens):
        j, v = spec.local_index(tok, line)
        ids.append(int(off) + j)
        values.append(float(np.float32(v)))
    return SparseInstance(tuple(ids), tuple(values), int(label))


def decode(schema: FeatureSchema, inst: SparseInstance) -> list:
    """Invert :func:`encode` as far as the encoding allows.

    Categorical fields give back the token (``UNKNOWN_TOKEN`` for the
    reserved bucket), discretized fields the bucket index and retained
    numerical fields the de-standardized value.
    """
    out = []
    for off, spec, gid, v in zip(schema.offsets, schema.fields, inst.ids, inst.values):
        j = gid - int(off)
        if spec.kind == CATEGORICAL:
            if j == spec.unknown_index:
                out.append(UNKNOWN_TOKEN)
            else:
                out.append(_inverse_vocab(spec)[j])
        elif spec.value_policy == DISCRETIZE:
            out.append(j)
        else:
            out.append(v * spec.std + spec.mean if spec.standardize else v)
    return out


def _inverse_vocab(spec: FieldSpec) -> dict[int, str]:
    inv = getattr(spec, "_inverse", None)
    if inv is None or len(inv) != len(spec.vocab):
        inv = {j: tok for tok, j in spec.vocab.items()}
        spec._inverse = inv
    return inv


def _parse_label(tok: str, line, path) -> int:
    tok = tok.strip()
    if tok not in ("0", "1"):
        raise ParseError(f"label must be 0 or 1, got {tok!r}", line=line, path=path)
    return int(tok)


def read_raw(path, delimiter: str = "\t") -> Iterator[tuple[int, int, list[str]]]:
    """Yield ``(line number, label, field tokens)`` from a raw delimited file."""
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise MalformedInputError(f"cannot open: {exc.strerror}", path=path) from exc
    with fh:
        for line, text in enumerate(fh, start=1):
            text = text.rstrip("\r\n")
            if not text:
                continue
            parts = text.split(delimiter)
            yield line, _parse_label(parts[0], line, path), parts[1:]


def build_schema_from_file(path, field_kinds, delimiter="\t", **kwargs) -> FeatureSchema:
    return build_schema((tokens for _, _, tokens in _checked(path, delimiter, len(field_kinds))), field_kinds, **kwargs)


def _checked(path, delimiter, m):
    for line, label, tokens in read_raw(path, delimiter):
        if len(tokens) != m:
            raise MalformedInputError(f"expected {m} fields, found {len(tokens)}", line=line, path=path)
        yield line, label, tokens


def online_map(raw_path, schema: FeatureSchema, delimiter: str = "\t") -> Iterator[SparseInstance]:
    """Re-encode the raw file on every read."""
    for line, label, tokens in _checked(raw_path, delimiter, schema.m):
        try:
            yield encode(schema, tokens, label, line=line)
        except MalformedInputError as exc:
            raise type(exc)(str(exc), path=raw_path) from exc


def record_dtype(m: int) -> np.dtype:
    """Packed little-endian layout of one indexed record."""
    feat = np.dtype([("id", "<u4"), ("value", "<f4")])
    return np.dtype([("label", "u1"), ("feat", feat, (m,))])


def index_offline(raw_path, schema: FeatureSchema, out_path, delimiter: str = "\t", chunk: int = 65536) -> int:
    """Write the ID-encoded dataset once; return the number of records."""
    dt = record_dtype(schema.m)
    buf = np.zeros(chunk, dtype=dt)
    n = fill = 0
    try:
        fh = open(out_path, "wb")
    except OSError as exc:
        raise MalformedInputError(f"cannot write index: {exc.strerror}", path=out_path) from exc
    with fh:
        for inst in online_map(raw_path, schema, delimiter):
            buf[fill] = (inst.label, list(zip(inst.ids, inst.values)))
            fill += 1
            if fill == chunk:
                fh.write(buf.tobytes())
                n += fill
                fill = 0
        fh.write(buf[:fill].tobytes())
        n += fill
    return n


def write_indexed(data: "Dataset", path) -> int:
    """Write an in-memory dataset in the indexed binary layout."""
    rec = np.zeros(len(data), dtype=record_dtype(data.m))
    rec["label"] = data.labels
    rec["feat"]["id"] = data.ids
    rec["feat"]["value"] = data.values
    rec.tofile(path)
    return len(rec)


def read_indexed(path, schema: FeatureSchema) -> "Dataset":
    dt = record_dtype(schema.m)
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise MalformedInputError(f"cannot read index: {exc.strerror}", path=path) from exc
    if len(blob) % dt.itemsize:
        raise MalformedInputError(
            f"size {len(blob)} is not a multiple of the {dt.itemsize}-byte record", path=path
        )
    raw = np.frombuffer(blob, dtype=dt)
    return Dataset(
        raw["feat"]["id"].astype(np.int64),
        raw["feat"]["value"].astype(np.float64),
        raw["label"].astype(np.float64),
    )


def iter_indexed(path, schema: FeatureSchema) -> Iterator[SparseInstance]:
    yield from read_indexed(path, schema).instances()


class Dataset:
    """Column-stacked instances: ``ids`` (n, m), ``values`` (n, m), ``labels`` (n,)."""

    def __init__(self, ids, values, labels):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.float64)
        if self.ids.ndim != 2 or self.ids.shape != self.values.shape or self.labels.shape != (self.ids.shape[0],):
            raise ParameterError(
                f"inconsistent dataset shapes ids{self.ids.shape} values{self.values.shape} labels{self.labels.shape}"
            )

    @classmethod
    def from_instances(cls, instances: Iterable[SparseInstance], m: int | None = None) -> "Dataset":
        insts = list(instances)
        if not insts:
            m = m or 0
            return cls(np.zeros((0, m), np.int64), np.zeros((0, m)), np.zeros(0))
        return cls(
            [i.ids for i in insts], [i.values for i in insts], [i.label for i in insts]
        )

    def __len__(self):
        return self.ids.shape[0]

    @property
    def m(self) -> int:
        return self.ids.shape[1]

    def take(self, index) -> "Dataset":
        return Dataset(self.ids[index], self.values[index], self.labels[index])

    def split(self, fraction: float) -> tuple["Dataset", "Dataset"]:
        cut = int(round(len(self) * fraction))
        return self.take(slice(0, cut)), self.take(slice(cut, None))

    def instances(self) -> Iterator[SparseInstance]:
        for ids, vals, y in zip(self.ids, self.values, self.labels):
            yield SparseInstance(tuple(int(i) for i in ids), tuple(float(v) for v in vals), int(y))

    def as_batch(self) -> "Batch":
        return Batch(self.ids, self.values, self.labels)


class Batch(Dataset):
    """A non-empty mini-batch; same column layout as :class:`Dataset`."""

    def __init__(self, ids, values, labels):
        super().__init__(ids, values, labels)
        if len(self) == 0:
            raise ParameterError("a batch must hold at least one instance")

    @property
    def size(self) -> int:
        return len(self)

    def take(self, index) -> "Batch":
        return Batch(self.ids[index], self.values[index], self.labels[index])

    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in (self.ids, self.values, self.labels):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def batches(source, bs: int, shuffle: bool = False, seed=None) -> Iterator[Batch]:
    """Cut ``source`` (a Dataset or an iterable of instances) into batches.

    The last batch may be short. Shuffling needs the whole epoch in memory.
    """
    if bs < 1:
        raise ParameterError(f"batch size must be >= 1, got {bs}")
    if not isinstance(source, Dataset):
        if not shuffle:
            yield from _stream_batches(source, bs)
            return
        source = Dataset.from_instances(source)
    n = len(source)
    order = np.random.default_rng(seed).permutation(n) if shuffle else None
    for start in range(0, n, bs):
        idx = order[start:start + bs] if order is not None else slice(start, start + bs)
        yield Batch(source.ids[idx], source.values[idx], source.labels[idx])


def _stream_batches(instances, bs):
    chunk = []
    for inst in instances:
        chunk.append(inst)
        if len(chunk) == bs:
            yield Dataset.from_instances(chunk).as_batch()
            chunk = []
    if chunk:
        yield Dataset.from_instances(chunk).as_batch()


_END = object()


class _Failure:
    def __init__(self, exc):
        self.exc = exc


def async_reader(source: Iterable, queue_capacity: int = 4) -> Iterator:
    """Read ``source`` on a background thread through a bounded FIFO.

    Items come out in source order. Errors raised by the producer are
    re-raised in the consumer at the position they occurred. Closing the
    returned generator (or dropping it) stops the producer.
    """
    if queue_capacity < 1:
        raise ParameterError(f"queue_capacity must be >= 1, got {queue_capacity}")
    q: queue.Queue = queue.Queue(maxsize=queue_capacity)
    stop = threading.Event()

    def put(item) -> bool:
        while not stop.is_set():
            try:
                q.put(item, timeout=0.05)
                return True
            except queue.Full:
                continue
        return False

    def produce():
        try:
            for item in source:
                if not put(item):
                    return
        except BaseException as exc:  # forwarded to the consumer
            put(_Failure(exc))
            return
        put(_END)

    thread = threading.Thread(target=produce, name="async-reader", daemon=True)

    def consume():
        thread.start()
        try:
            while True:
                item = q.get()
                if item is _END:
                    return
                if isinstance(item, _Failure):
                    raise item.exc
                yield item
        finally:
            stop.set()
            while True:
                try:
                    q.get_nowait()
                except queue.Empty:
                    break
            thread.join(timeout=5.0)

    return consume()


def throttle(source: Iterable, delay: float) -> Iterator:
    """Yield from ``source`` after sleeping ``delay`` seconds per item (simulated I/O)."""
    for item in source:
        if delay > 0:
            time.sleep(delay)
        yield item
