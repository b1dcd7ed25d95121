"""Building blocks that models sum into a logit.

Each component reads its tensors from a ParameterStore, returns a per
instance contribution plus a cache, and accumulates hand-derived
gradients into a GradientSet. Inputs are ``ids`` (B, m) global feature ids
and ``vals`` (B, m) feature values.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..numerics import (
    activate,
    activate_grad,
    dropout_mask,
    layer_norm_backward,
    layer_norm_forward,
)

_HASH_MULT = np.uint64(0x9E3779B97F4A7C15)
_HASH_ADD = np.uint64(0x632BE59BD9B4E019)


def _scatter_rows(target: np.ndarray, ids: np.ndarray, rows: np.ndarray) -> None:
    """``target[ids[b, f]] += rows[b, f]`` with repeated ids accumulated."""
    flat = ids.reshape(-1)
    np.add.at(target, flat, rows.reshape((flat.size,) + target.shape[1:]))


def check_ids(ids: np.ndarray, d: int) -> None:
    if ids.size and (ids.min() < 0 or ids.max() >= d):
        raise IndexError(f"feature id outside [0, {d}): min {ids.min()}, max {ids.max()}")


def field_pairs(m: int) -> tuple[np.ndarray, np.ndarray]:
    """All field pairs i < j in row-major order."""
    return np.triu_indices(m, 1)


def pair_hash(a: np.ndarray, b: np.ndarray, bits: int) -> np.ndarray:
    """Multiply-shift hash of the unordered id pair into ``2**bits`` slots."""
    lo = np.minimum(a, b).astype(np.uint64)
    hi = np.maximum(a, b).astype(np.uint64)
    key = (lo << np.uint64(32)) | hi
    mixed = key * _HASH_MULT + _HASH_ADD
    return (mixed >> np.uint64(64 - bits)).astype(np.int64)


class LinearTerm:
    """Global bias plus order-1 weights: ``w0 + sum_f w[id_f] * x_f``."""

    def tensor_specs(self, d):
        return [("w0", (1,), "zeros"), ("w", (d,), "zeros")]

    def forward(self, store, ids, vals, train=False, rng=None):
        w = store["w"]
        check_ids(ids, w.shape[0])
        return store["w0"][0] + (w[ids] * vals).sum(axis=1), None

    def backward(self, store, ids, vals, cache, dy, grads):
        grads["w0"][0] += dy.sum()
        _scatter_rows(grads["w"], ids, dy[:, None] * vals)
        grads.touch("w", ids)


class PairHashTerm:
    """Poly-2 interaction weights looked up through a hashed pair table."""

    def __init__(self, m, bits):
        self.bits = bits
        self.I, self.J = field_pairs(m)

    def tensor_specs(self, d):
        return [("pair_w", (1 << self.bits,), "zeros")]

    def slots(self, ids):
        return pair_hash(ids[:, self.I], ids[:, self.J], self.bits)

    def forward(self, store, ids, vals, train=False, rng=None):
        h = self.slots(ids)
        xx = vals[:, self.I] * vals[:, self.J]
        return (store["pair_w"][h] * xx).sum(axis=1), (h, xx)

    def backward(self, store, ids, vals, cache, dy, grads):
        h, xx = cache
        _scatter_rows(grads["pair_w"], h, dy[:, None] * xx)
        grads.touch("pair_w", h)


class FMTerm:
    """Pairwise inner products of latent vectors, O(k m) per instance.

    Uses ``0.5 * sum_f [(sum_i v_if x_i)^2 - sum_i v_if^2 x_i^2]``.
    """

    def __init__(self, key="V"):
        self.key = key

    def forward(self, store, ids, vals, train=False, rng=None):
        V = store[self.key]
        check_ids(ids, V.shape[0])
        vx = V[ids] * vals[..., None]
        s = vx.sum(axis=1)
        y = 0.5 * (s * s - (vx * vx).sum(axis=1)).sum(axis=1)
        return y, (vx, s)

    def backward(self, store, ids, vals, cache, dy, grads):
        vx, s = cache
        dvx = dy[:, None, None] * (s[:, None, :] - vx)
        _scatter_rows(grads[self.key], ids, dvx * vals[..., None])
        grads.touch(self.key, ids)


class DeepTower:
    """Feed-forward tower over field embeddings, optionally behind a product layer.

    With ``product=None`` the first hidden layer reads the concatenated
    embeddings. Otherwise it reads them through ``W_lin`` and the pairwise
    products through ``W_quad``. The final projection has no activation.
    """

    def __init__(self, key, width, m, hidden, activation="relu", keep_prob=1.0,
                 product=None, outer_exact=False, layer_norm=False, ln_epsilon=1e-5):
        self.key = key
        self.k = width
        self.m = m
        self.hidden = tuple(hidden)
        self.activation = activation
        self.keep_prob = keep_prob
        self.product = product
        self.outer_exact = outer_exact
        self.layer_norm = layer_norm
        self.ln_epsilon = ln_epsilon
        self.I, self.J = field_pairs(m)
        n_pairs = len(self.I)
        # one-hot pair -> field selectors, used to route pair gradients back
        self.sel_i = np.zeros((n_pairs, m))
        self.sel_i[np.arange(n_pairs), self.I] = 1.0
        self.sel_j = np.zeros((n_pairs, m))
        self.sel_j[np.arange(n_pairs), self.J] = 1.0

    @property
    def n_pairs(self) -> int:
        return len(self.I)

    @property
    def inner_width(self) -> int:
        return self.n_pairs if self.product in ("inner", "both") else 0

    @property
    def outer_width(self) -> int:
        if self.product not in ("outer", "both"):
            return 0
        return self.k * self.k * (self.n_pairs if self.outer_exact else 1)

    @property
    def quad_width(self) -> int:
        return self.inner_width + self.outer_width

    def tensor_specs(self, d):
        specs = []
        if self.key == "E":
            specs.append(("E", (d, self.k), "normal"))
        h1 = self.hidden[0]
        if self.product is None:
            specs += [("W1", (h1, self.m * self.k), "normal"), ("b1", (h1,), "zeros")]
        else:
            specs += [
                ("W_lin", (h1, self.m * self.k), "normal"),
                ("W_quad", (h1, self.quad_width), "normal"),
                ("b1", (h1,), "zeros"),
            ]
        if self.layer_norm:
            specs += [("ln_gain1", (h1,), "ones"), ("ln_bias1", (h1,), "zeros")]
        for l in range(1, len(self.hidden)):
            n_in, n_out = self.hidden[l - 1], self.hidden[l]
            specs += [(f"W{l + 1}", (n_out, n_in), "normal"), (f"b{l + 1}", (n_out,), "zeros")]
            if self.layer_norm:
                specs += [(f"ln_gain{l + 1}", (n_out,), "ones"), (f"ln_bias{l + 1}", (n_out,), "zeros")]
        specs += [("W_out", (1, self.hidden[-1]), "normal"), ("b_out", (1,), "zeros")]
        return specs

    def embed(self, store, ids, vals):
        table = store[self.key]
        if table.shape[1] != self.k:
            raise DimensionError(f"embedding table {self.key}{table.shape} but width {self.k} expected")
        check_ids(ids, table.shape[0])
        return table[ids] * vals[..., None]

    def products(self, e):
        parts = []
        if self.product in ("inner", "both"):
            parts.append(np.einsum("bpk,bpk->bp", e[:, self.I], e[:, self.J]))
        if self.product in ("outer", "both"):
            B = e.shape[0]
            if self.outer_exact:
                outer = e[:, self.I, :, None] * e[:, self.J, None, :]
            else:
                s = e.sum(axis=1)
                outer = s[:, :, None] * s[:, None, :]
            parts.append(outer.reshape(B, -1))
        return np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]

    def _products_backward(self, e, dp):
        de = np.zeros_like(e)
        col = 0
        if self.product in ("inner", "both"):
            g = dp[:, : self.n_pairs]
            col = self.n_pairs
            ei, ej = e[:, self.I], e[:, self.J]
            de += np.einsum("bpk,pm->bmk", g[..., None] * ej, self.sel_i)
            de += np.einsum("bpk,pm->bmk", g[..., None] * ei, self.sel_j)
        if self.product in ("outer", "both"):
            B, k = e.shape[0], self.k
            go = dp[:, col:]
            if self.outer_exact:
                G = go.reshape(B, self.n_pairs, k, k)
                ei, ej = e[:, self.I], e[:, self.J]
                de += np.einsum("bpx,pm->bmx", np.einsum("bpxy,bpy->bpx", G, ej), self.sel_i)
                de += np.einsum("bpy,pm->bmy", np.einsum("bpxy,bpx->bpy", G, ei), self.sel_j)
            else:
                G = go.reshape(B, k, k)
                s = e.sum(axis=1)
                ds = np.einsum("bxy,by->bx", G, s) + np.einsum("bxy,bx->by", G, s)
                de += ds[:, None, :]
        return de

    def forward(self, store, ids, vals, train=False, rng=None):
        B = ids.shape[0]
        e = self.embed(store, ids, vals)
        z = e.reshape(B, self.m * self.k)
        cache = {"e": e, "z": z, "layers": []}
        if self.product is None:
            pre = z @ store["W1"].T + store["b1"]
        else:
            p = self.products(e)
            cache["p"] = p
            pre = z @ store["W_lin"].T + p @ store["W_quad"].T + store["b1"]
        x = None
        for l in range(1, len(self.hidden) + 1):
            if l > 1:
                pre = x @ store[f"W{l}"].T + store[f"b{l}"]
            ln_cache = None
            if self.layer_norm:
                pre_n, ln_cache = layer_norm_forward(
                    pre, store[f"ln_gain{l}"], store[f"ln_bias{l}"], self.ln_epsilon
                )
            else:
                pre_n = pre
            a = activate(self.activation, pre_n)
            mask = None
            if train and self.keep_prob < 1.0:
                mask = dropout_mask(self.keep_prob, a.shape, rng)
                a = a * mask
            cache["layers"].append((x, pre_n, ln_cache, mask))
            x = a
        cache["x_last"] = x
        y = (x @ store["W_out"].T)[:, 0] + store["b_out"][0]
        return y, cache

    def backward(self, store, ids, vals, cache, dy, grads):
        x = cache["x_last"]
        grads["W_out"] += dy[None, :] @ x
        grads["b_out"][0] += dy.sum()
        dx = dy[:, None] * store["W_out"]
        for l in range(len(self.hidden), 0, -1):
            x_in, pre_n, ln_cache, mask = cache["layers"][l - 1]
            if mask is not None:
                dx = dx * mask
            dpre = dx * activate_grad(self.activation, pre_n)
            if self.layer_norm:
                dpre, dgain, dbias = layer_norm_backward(dpre, store[f"ln_gain{l}"], ln_cache)
                grads[f"ln_gain{l}"] += dgain
                grads[f"ln_bias{l}"] += dbias
            grads[f"b{l}"] += dpre.sum(axis=0)
            if l > 1:
                grads[f"W{l}"] += dpre.T @ x_in
                dx = dpre @ store[f"W{l}"]
        e, z = cache["e"], cache["z"]
        if self.product is None:
            grads["W1"] += dpre.T @ z
            dz = dpre @ store["W1"]
            de = dz.reshape(e.shape)
        else:
            p = cache["p"]
            grads["W_lin"] += dpre.T @ z
            grads["W_quad"] += dpre.T @ p
            de = (dpre @ store["W_lin"]).reshape(e.shape)
            de += self._products_backward(e, dpre @ store["W_quad"])
        _scatter_rows(grads[self.key], ids, de * vals[..., None])
        grads.touch(self.key, ids)
