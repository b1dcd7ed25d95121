"""Objective, optimizers, L2 penalty and the (data-parallel) training loop."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigurationError, NumericalError, ParameterError
from .featurespace import Batch, Dataset, async_reader, batches
from .models import CTRModel, GradientSet, ModelSpec, ParameterStore, init_model, pretrain_fnn
from .models.store import SPARSE_TENSORS
from .numerics import sigmoid, split_rng

log = logging.getLogger(__name__)

PROB_EPS = 1e-12


def logloss(y, p):
    """Binary cross-entropy ``-[y ln p + (1 - y) ln(1 - p)]`` with clipping."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(y, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def logloss_from_logits(y, z):
    """Same loss evaluated stably from logits."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.logaddexp(0.0, z) - y * z


def loss_grad(y, p):
    """d loss / d logit for the sigmoid + cross-entropy pair."""
    return np.asarray(p, dtype=np.float64) - np.asarray(y, dtype=np.float64)


class Adam:
    """Adam with lazy row updates for per-feature tensors.

    Rows of ``w``, ``V``, ``E`` and ``pair_w`` that no instance in the batch
    touched keep their moments and values unchanged.
    """

    name = "adam"

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, lazy=True):
        if lr < 0:
            raise ParameterError(f"learning rate must be >= 0, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.lazy = lazy
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, store: ParameterStore, grads: GradientSet) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for name, g in grads.tensors.items():
            p = store[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            rows = grads.rows.get(name) if self.lazy and name in SPARSE_TENSORS else None
            if self.lazy and name in SPARSE_TENSORS and rows is None:
                continue
            if rows is None:
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * g * g
                p -= self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
            else:
                gr = g[rows]
                m[rows] = b1 * m[rows] + (1 - b1) * gr
                v[rows] = b2 * v[rows] + (1 - b2) * gr * gr
                p[rows] -= self.lr * (m[rows] / corr1) / (np.sqrt(v[rows] / corr2) + self.eps)


class FTRL:
    """Per-coordinate FTRL-Proximal for the linear model's ``w0`` and ``w``."""

    name = "ftrl"
    ALLOWED = ("w0", "w")

    def __init__(self, alpha=0.1, beta=1.0, l1=1.0, l2=1.0):
        if alpha < 0:
            raise ParameterError("alpha must be >= 0")
        self.alpha = alpha
        self.beta = beta
        self.l1 = l1
        self.l2 = l2
        self.t = 0
        self.z: dict[str, np.ndarray] = {}
        self.n: dict[str, np.ndarray] = {}

    @property
    def lr(self):
        return self.alpha

    @lr.setter
    def lr(self, value):
        self.alpha = value

    def weights(self, z, n):
        if self.alpha == 0:
            return np.zeros_like(z)
        w = -(z - np.sign(z) * self.l1) / ((self.beta + np.sqrt(n)) / self.alpha + self.l2)
        return np.where(np.abs(z) <= self.l1, 0.0, w)

    def step(self, store: ParameterStore, grads: GradientSet) -> None:
        extra = [n for n in store.names() if n not in self.ALLOWED]
        if extra:
            raise ConfigurationError(f"FTRL only trains {self.ALLOWED}; store also holds {extra}")
        self.t += 1
        if self.alpha == 0:
            return
        for name, g in grads.tensors.items():
            p = store[name]
            if name not in self.z:
                self.z[name] = np.zeros_like(p)
                self.n[name] = np.zeros_like(p)
            rows = grads.rows.get(name) if name == "w" else slice(None)
            if rows is None:
                continue
            z, n = self.z[name], self.n[name]
            gr, nr = g[rows], n[rows]
            sigma = (np.sqrt(nr + gr * gr) - np.sqrt(nr)) / self.alpha
            z[rows] += gr - sigma * p[rows]
            n[rows] = nr + gr * gr
            p[rows] = self.weights(z[rows], n[rows])


def regularize(grads: GradientSet, store: ParameterStore, l2_fm: float) -> GradientSet:
    """Add ``l2_fm * param`` to the FM gradients (``w`` and ``V``), active rows only."""
    if l2_fm < 0:
        raise ParameterError(f"l2_fm must be >= 0, got {l2_fm}")
    if l2_fm == 0:
        return grads
    for name in ("w", "V"):
        if name not in store:
            continue
        rows = grads.rows.get(name)
        if rows is None:
            continue
        grads[name][rows] += l2_fm * store[name][rows]
    return grads


def scaled_lr(lr: float, P: int, bs_ratio: float | None = None) -> float:
    """Square-root learning-rate rule for a ``bs_ratio``-times larger batch.

    With P workers each consuming a full batch the growth is ``P``.
    """
    if P < 1:
        raise ParameterError(f"worker count must be >= 1, got {P}")
    growth = P if bs_ratio is None else bs_ratio
    return lr * math.sqrt(growth)


@dataclass
class TrainConfig:
    bs: int = 256
    lr: float = 1e-3
    epochs: int = 1
    l2_fm: float = 0.0
    keep_prob: float | None = None
    workers: int = 1
    lr_scale_on_parallel: bool = False
    seed: int = 0
    optimizer: str = "auto"
    shuffle: bool = True
    async_reading: bool = False
    queue_capacity: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    ftrl_alpha: float = 0.1
    ftrl_beta: float = 1.0
    ftrl_l1: float = 1.0
    ftrl_l2: float = 1.0
    pretrain_epochs: int | None = None

    def __post_init__(self):
        if self.bs < 1:
            raise ConfigurationError("bs must be >= 1")
        if not self.lr > 0:
            raise ConfigurationError(f"lr must be > 0, got {self.lr}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.optimizer not in ("auto", "adam", "ftrl"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.l2_fm < 0:
            raise ConfigurationError("l2_fm must be >= 0")
        if self.keep_prob is not None and not 0 < self.keep_prob <= 1:
            raise ConfigurationError("keep_prob must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown training keys: {sorted(unknown)}")
        return cls(**d)

    def effective_lr(self) -> float:
        base = self.ftrl_alpha if self.optimizer == "ftrl" else self.lr
        return scaled_lr(base, self.workers) if self.lr_scale_on_parallel else base


def make_optimizer(config: TrainConfig, kind: str):
    """FTRL for LR, Adam for everything else unless configured otherwise."""
    name = config.optimizer
    if name == "auto":
        name = "ftrl" if kind == "lr" else "adam"
    scale = math.sqrt(config.workers) if config.lr_scale_on_parallel else 1.0
    if name == "ftrl":
        if kind != "lr":
            raise ConfigurationError(f"FTRL applies to the LR model only, not {kind}")
        return FTRL(config.ftrl_alpha * scale, config.ftrl_beta, config.ftrl_l1, config.ftrl_l2)
    return Adam(config.lr * scale, config.beta1, config.beta2, config.adam_eps)


def batch_gradients(model: CTRModel, store, batch: Batch, train=True, rng=None):
    """Summed loss and summed (not averaged) gradients over ``batch``."""
    logits, caches = model.forward(store, batch, train=train, rng=rng)
    loss = float(logloss_from_logits(batch.labels, logits).sum())
    dlogits = loss_grad(batch.labels, sigmoid(logits))
    return loss, model.backward(store, batch, caches, dlogits)


def shard_bounds(n: int, P: int) -> list[tuple[int, int]]:
    """P contiguous shards; the last one absorbs the remainder."""
    size = n // P
    bounds = [(i * size, (i + 1) * size) for i in range(P - 1)]
    bounds.append(((P - 1) * size, n))
    return [(a, b) for a, b in bounds if b > a]


def average_gradients(shard_grads: list[tuple[float, GradientSet]], total: int) -> GradientSet:
    """Sum per-shard gradient sums in worker order, divide once by ``total``."""
    acc = shard_grads[0][1].copy()
    for _, g in shard_grads[1:]:
        acc.iadd(g)
    return acc.scale(1.0 / total)


def parallel_gradients(model, store, batch: Batch, P: int, pool=None, rngs=None, train=True):
    """Mean loss and mean gradient of ``batch`` computed on ``P`` shards."""
    bounds = shard_bounds(batch.size, P)
    rngs = rngs or [None] * P
    jobs = [(batch.take(slice(a, b)), rngs[i]) for i, (a, b) in enumerate(bounds)]
    if pool is None or len(jobs) == 1:
        results = [batch_gradients(model, store, sb, train, r) for sb, r in jobs]
    else:
        futures = [pool.submit(batch_gradients, model, store, sb, train, r) for sb, r in jobs]
        results = [f.result() for f in futures]
    loss = sum(l for l, _ in results) / batch.size
    return loss, average_gradients(results, batch.size)


def parallel_train_step(model, store, optimizer, batch: Batch, P: int = 1, pool=None, rngs=None,
                        l2_fm: float = 0.0, train=True):
    """One synchronous data-parallel update; returns ``(mean loss, applied gradients)``."""
    if P < 1:
        raise ParameterError(f"worker count must be >= 1, got {P}")
    loss, grads = parallel_gradients(model, store, batch, P, pool, rngs, train)
    regularize(grads, store, l2_fm)
    optimizer.step(store, grads)
    return loss, grads


def _offender(grads, store):
    return grads.nonfinite() or store.nonfinite() or "loss"


def train_epoch(model: CTRModel, store: ParameterStore, optimizer, data: Iterable[Batch],
                config: TrainConfig, epoch: int = 0, step0: int = 0,
                on_step: Callable[[dict], None] | None = None) -> list[dict]:
    """One pass over ``data``: forward, loss, backward, L2, optimizer step."""
    P = config.workers
    rng_root = np.random.SeedSequence([config.seed, epoch])
    records = []
    t0 = time.perf_counter()
    pool = ThreadPoolExecutor(P) if P > 1 else None
    try:
        for i, batch in enumerate(data):
            step = step0 + i
            rngs = split_rng(rng_root.spawn(1)[0], P)
            loss, grads = parallel_train_step(
                model, store, optimizer, batch, P, pool, rngs, config.l2_fm
            )
            if not math.isfinite(loss) or grads.nonfinite() or store.nonfinite():
                name = _offender(grads, store)
                raise NumericalError(
                    f"non-finite value at step {step} (batch {i}, tensor {name})",
                    step=step, batch_id=i, tensor=name,
                )
            rec = {
                "step": step,
                "epoch": epoch,
                "mean_loss": loss,
                "lr": optimizer.lr,
                "wall_time": time.perf_counter() - t0,
            }
            records.append(rec)
            if on_step is not None:
                on_step(rec)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def evaluate(model: CTRModel, store, data: Dataset, bs: int = 4096) -> dict:
    from .metrics import auc, dataset_logloss

    probs = predict_dataset(model, store, data, bs)
    out = {"logloss": float(dataset_logloss(data.labels, probs))}
    try:
        out["auc"] = float(auc(probs, data.labels))
    except ValueError:
        out["auc"] = float("nan")
    return out


def predict_dataset(model, store, data: Dataset, bs: int = 4096) -> np.ndarray:
    return np.concatenate(
        [model.predict(store, b) for b in batches(data, bs)] or [np.zeros(0)]
    )


@dataclass
class FitResult:
    model: CTRModel
    store: ParameterStore
    steps: list = field(default_factory=list)
    history: list = field(default_factory=list)
    seconds: float = 0.0


def fit(spec: ModelSpec, train: Dataset, config: TrainConfig, d: int, test: Dataset | None = None,
        on_step=None, on_epoch=None, eval_train: bool = False) -> FitResult:
    """Initialise, optionally pre-train (FNN), and train for ``config.epochs``.

    ``history`` gets one row per epoch (plus epoch 0 before training) with
    test AUC and Logloss when ``test`` is given.
    """
    if config.keep_prob is not None and spec.deep is not None:
        spec = ModelSpec.from_dict({**spec.to_dict(), "keep_prob": config.keep_prob})
    model, store = init_model(spec, train.m, d, seed=config.seed)
    t_start = time.perf_counter()
    if spec.kind == "fnn":
        fm_spec = ModelSpec("fm", k=spec.k, init_std=spec.init_std)
        fm_cfg = TrainConfig.from_dict(
            {**config.to_dict(), "optimizer": "adam",
             "epochs": config.pretrain_epochs if config.pretrain_epochs is not None else config.epochs}
        )
        fm_result = fit(fm_spec, train, fm_cfg, d)
        store = pretrain_fnn(fm_result.store, store)
    optimizer = make_optimizer(config, spec.kind)
    result = FitResult(model, store)

    def record_eval(epoch):
        row = {"epoch": epoch}
        if test is not None:
            row.update({f"test_{k}": v for k, v in evaluate(model, store, test).items()})
        if eval_train:
            row.update({f"train_{k}": v for k, v in evaluate(model, store, train).items()})
        result.history.append(row)
        if on_epoch is not None:
            on_epoch(row)

    if test is not None or eval_train:
        record_eval(0)
    step = 0
    for epoch in range(1, config.epochs + 1):
        source = batches(train, config.bs, shuffle=config.shuffle, seed=(config.seed, epoch))
        if config.async_reading:
            source = async_reader(source, config.queue_capacity)
        recs = train_epoch(model, store, optimizer, source, config, epoch, step, on_step)
        step += len(recs)
        result.steps.extend(recs)
        if test is not None or eval_train:
            record_eval(epoch)
    result.seconds = time.perf_counter() - t_start
    return result
