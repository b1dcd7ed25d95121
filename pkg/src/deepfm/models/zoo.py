"""The CTR model zoo: wide, deep, hybrid and DeepFM predictors.

Every model is a sum of components (see :mod:`.components`). ``forward``
returns logits; the sigmoid lives in :func:`predict` and the loss.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..numerics import make_rng, sigmoid
from .components import DeepTower, FMTerm, LinearTerm, PairHashTerm
from .spec import ModelSpec
from .store import GradientSet, ParameterStore


class CTRModel:
    """Stateless evaluator for one :class:`ModelSpec` over ``m`` fields.

    Forward caches are returned to the caller, so one model object can
    serve several worker threads reading the same store.
    """

    def __init__(self, spec: ModelSpec, m: int):
        self.spec = spec
        self.m = m
        self.parts = []
        wide = spec.wide
        if wide in ("lr", "poly2", "fm"):
            self.parts.append(LinearTerm())
        if wide == "poly2":
            self.parts.append(PairHashTerm(m, spec.poly2_bits))
        if wide == "fm":
            self.parts.append(FMTerm("V"))
        self.tower = None
        if spec.deep is not None:
            self.tower = DeepTower(
                spec.deep_table,
                spec.deep_width,
                m,
                spec.hidden,
                activation=spec.activation,
                keep_prob=spec.keep_prob,
                product=spec.product,
                outer_exact=spec.outer_exact,
                layer_norm=spec.use_layer_norm,
                ln_epsilon=spec.ln_epsilon,
            )
            self.parts.append(self.tower)

    def tensor_specs(self, d: int):
        specs = []
        for part in self.parts:
            if isinstance(part, FMTerm):
                specs.append(("V", (d, self.spec.k), "normal"))
            else:
                specs.extend(part.tensor_specs(d))
        return specs

    def init_store(self, d: int, seed=0) -> ParameterStore:
        """V, E and dense weights ~ N(0, init_std); w, biases zero; LN gains one."""
        rng = make_rng(seed)
        tensors = {}
        for name, shape, how in self.tensor_specs(d):
            if how == "normal":
                tensors[name] = rng.normal(0.0, self.spec.init_std, size=shape)
            elif how == "ones":
                tensors[name] = np.ones(shape)
            else:
                tensors[name] = np.zeros(shape)
        return ParameterStore(tensors)

    def check_store(self, store: ParameterStore) -> None:
        d = store.total_features
        expected = [(n, s) for n, s, _ in self.tensor_specs(d)]
        actual = [(n, store[n].shape) for n in store.names()]
        if expected != actual:
            raise DimensionError(f"{self.spec.kind}: store layout {actual} != expected {expected}")

    def forward(self, store, batch, train=False, rng=None):
        ids, vals = batch.ids, batch.values
        if ids.shape[1] != self.m:
            raise DimensionError(f"batch has {ids.shape[1]} fields, model expects {self.m}")
        logits = np.zeros(ids.shape[0])
        caches = []
        for part in self.parts:
            y, c = part.forward(store, ids, vals, train=train, rng=rng)
            logits += y
            caches.append(c)
        return logits, caches

    def backward(self, store, batch, caches, dlogits) -> GradientSet:
        grads = GradientSet.zeros_like(store)
        dlogits = np.asarray(dlogits, dtype=np.float64)
        for part, c in zip(self.parts, caches):
            part.backward(store, batch.ids, batch.values, c, dlogits, grads)
        return grads

    def logits(self, store, batch) -> np.ndarray:
        return self.forward(store, batch, train=False)[0]

    def predict(self, store, batch) -> np.ndarray:
        return sigmoid(self.logits(store, batch))


def build_model(spec: ModelSpec, m: int) -> CTRModel:
    return CTRModel(spec, m)


def init_model(spec: ModelSpec, m: int, d: int, seed=0) -> tuple[CTRModel, ParameterStore]:
    model = CTRModel(spec, m)
    return model, model.init_store(d, seed)


# Functional entry points, one per predictor family.

def forward_lr(store, batch) -> np.ndarray:
    return LinearTerm().forward(store, batch.ids, batch.values)[0]


def forward_poly2(store, batch) -> np.ndarray:
    bits = int(np.log2(store["pair_w"].shape[0]))
    term = PairHashTerm(batch.ids.shape[1], bits)
    return forward_lr(store, batch) + term.forward(store, batch.ids, batch.values)[0]


def embed(store, instance, key="V") -> np.ndarray:
    """Field embeddings ``e_i = x_i * V[id_i]`` for one instance, shape (m, k)."""
    ids = np.asarray(instance.ids, dtype=np.int64)
    vals = np.asarray(instance.values, dtype=np.float64)
    return store[key][ids] * vals[:, None]


def forward_fm(store, batch) -> np.ndarray:
    return forward_lr(store, batch) + FMTerm("V").forward(store, batch.ids, batch.values)[0]


def _tower(spec: ModelSpec, m: int) -> DeepTower:
    return CTRModel(spec, m).tower


def forward_dnn(store, batch, spec: ModelSpec, train=False, rng=None) -> np.ndarray:
    """Deep component alone (DNN or PNN tower according to ``spec``)."""
    return _tower(spec, batch.ids.shape[1]).forward(store, batch.ids, batch.values, train, rng)[0]


def forward_pnn(store, batch, spec: ModelSpec) -> np.ndarray:
    if spec.product is None:
        raise DimensionError(f"{spec.kind} has no product layer")
    return forward_dnn(store, batch, spec)


def forward_deepfm(store, batch, spec: ModelSpec) -> np.ndarray:
    """FM output plus deep output over the shared table V."""
    if not spec.shared_embedding:
        raise DimensionError(f"{spec.kind} does not share its embedding with an FM part")
    return forward_fm(store, batch) + forward_dnn(store, batch, spec)


def forward_hybrid(store_wide, store_deep, batch, wide_kind: str, spec: ModelSpec) -> np.ndarray:
    """Wide part (LR or FM) plus a DNN with its own embedding table."""
    wide = forward_lr(store_wide, batch) if wide_kind == "lr" else forward_fm(store_wide, batch)
    return wide + forward_dnn(store_deep, batch, spec)


def forward_fnn(store, batch, spec: ModelSpec) -> np.ndarray:
    return forward_dnn(store, batch, spec)


def pretrain_fnn(fm_store: ParameterStore, fnn_store: ParameterStore) -> ParameterStore:
    """Copy FM's ``[V_i ; w_i]`` rows into the FNN embedding table."""
    V, w = fm_store["V"], fm_store["w"]
    E = fnn_store["E"]
    if E.shape != (V.shape[0], V.shape[1] + 1):
        raise DimensionError(
            f"FNN embedding {E.shape} must be (d, k+1) for FM latent vectors {V.shape}"
        )
    out = fnn_store.copy()
    out["E"] = np.hstack([V, w[:, None]])
    return out


def backward(store, spec: ModelSpec, batch, dlogits, caches=None) -> GradientSet:
    """Gradients of ``sum_b dlogits[b] * logit_b`` w.r.t. every tensor.

    Without ``caches`` the forward pass is re-run in inference mode.
    """
    model = CTRModel(spec, batch.ids.shape[1])
    if caches is None:
        _, caches = model.forward(store, batch, train=False)
    return model.backward(store, batch, caches, dlogits)


def predict(store, spec: ModelSpec, batch) -> np.ndarray:
    return CTRModel(spec, batch.ids.shape[1]).predict(store, batch)
