"""Dense numeric kernel: affine maps, activations, dropout, layer norm, RNG.

Everything here works on float64 numpy arrays. A "vector batch" is a 2-D
array of shape (batch, width).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")
SIGMOID_CLAMP = 40.0


def make_rng(seed) -> np.random.Generator:
    """Return a generator for ``seed`` (int, SeedSequence or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def split_rng(seed, n: int) -> list[np.random.Generator]:
    """Split ``seed`` into ``n`` independent child streams."""
    if isinstance(seed, np.random.Generator):
        return list(seed.spawn(n))
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def affine(W: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compute ``W @ a_i + b`` for every row ``a_i`` of ``a``."""
    W = np.asarray(W, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    single = a.ndim == 1
    a2 = a[None, :] if single else a
    if W.ndim != 2 or a2.ndim != 2 or W.shape[1] != a2.shape[1] or b.shape != (W.shape[0],):
        raise DimensionError(
            f"affine shape mismatch: W{W.shape} x a{a.shape} + b{b.shape}"
        )
    out = a2 @ W.T + b
    return out[0] if single else out


def sigmoid(z):
    z = np.clip(np.asarray(z, dtype=np.float64), -SIGMOID_CLAMP, SIGMOID_CLAMP)
    return 1.0 / (1.0 + np.exp(-z))


def activate(kind: str, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "identity":
        return z.copy()
    raise ParameterError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activate_grad(kind: str, z: np.ndarray) -> np.ndarray:
    """Elementwise derivative of ``activate(kind, .)`` evaluated at ``z``."""
    z = np.asarray(z, dtype=np.float64)
    if kind == "relu":
        return (z > 0).astype(np.float64)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == "sigmoid":
        s = sigmoid(z)
        # derivative is zero outside the clamp window
        return np.where(np.abs(z) > SIGMOID_CLAMP, 0.0, s * (1.0 - s))
    if kind == "identity":
        return np.ones_like(z)
    raise ParameterError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def dropout_mask(keep_prob: float, shape, seed) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 or ``1 / keep_prob``."""
    if not 0.0 < keep_prob <= 1.0:
        raise ParameterError(f"keep_prob must lie in (0, 1], got {keep_prob}")
    if keep_prob == 1.0:
        return np.ones(shape)
    rng = make_rng(seed)
    kept = rng.random(shape) < keep_prob
    return kept / keep_prob


def layer_norm(x, gain, bias, epsilon: float = 1e-5):
    """Normalize each row of ``x`` over its last axis, then scale and shift."""
    out, _ = layer_norm_forward(x, gain, bias, epsilon)
    return out


def layer_norm_forward(x, gain, bias, epsilon):
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + epsilon)
    xhat = centered * inv_std
    return xhat * gain + bias, (xhat, inv_std)


def layer_norm_backward(dout, gain, cache):
    """Gradients of layer norm w.r.t. input, gain and bias (batched rows)."""
    xhat, inv_std = cache
    dgain = (dout * xhat).sum(axis=0)
    dbias = dout.sum(axis=0)
    dxhat = dout * gain
    n = xhat.shape[-1]
    dx = inv_std / n * (
        n * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias
