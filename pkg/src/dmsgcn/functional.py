"""Differentiable layer primitives built on :mod:`dmsgcn.tensor`."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Tensor, as_tensor, record


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; identical streams on every platform."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def hadamard(a: Tensor, b) -> Tensor:
    """Elementwise product of two same-shape tensors.

    ``b`` is typically a constant binary mask.  The gradient sent to ``a`` is
    exactly +0.0 wherever ``b == 0``.
    """
    a = as_tensor(a)
    b = as_tensor(b, dtype=a.dtype)
    if a.shape != b.shape:
        raise DimensionError(f"hadamard: shapes {a.shape} and {b.shape} differ")

    def bw(g):
        # adding +0.0 turns the -0.0 of (negative * 0) into +0.0
        ga = g * b.data + 0.0 if a.requires_grad else None
        gb = g * a.data + 0.0 if b.requires_grad else None
        return ga, gb

    return record("hadamard", (a, b), a.data * b.data, bw)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """``x`` where non-negative, ``slope * x`` elsewhere.

    ``slope`` is a scalar (shape ``(1,)``) or per-channel (matching the last
    axis of ``x``).
    """
    x = as_tensor(x)
    if slope.size != 1 and slope.shape != (x.shape[-1],):
        raise DimensionError(f"prelu: slope shape {slope.shape} does not fit input {x.shape}")
    s = slope.data if slope.size != 1 else slope.data.reshape(())
    neg_part = np.minimum(x.data, 0)
    factor = np.where(x.data < 0, s, x.dtype.type(1))
    out = x.data * factor

    def bw(g):
        gx = g * factor if x.requires_grad else None
        gs = None
        if slope.requires_grad:
            if slope.size == 1:
                gs = np.asarray(np.vdot(g, neg_part)).reshape(slope.shape)
            else:
                gs = (g * neg_part).reshape(-1, x.shape[-1]).sum(axis=0)
        return gx, gs

    return record("prelu", (x, slope), out, bw)


def dropout(x: Tensor, rate: float, training: bool, rng=None) -> Tensor:
    """Inverted dropout: identity in evaluation, scaled Bernoulli mask in training."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    rng = make_rng(0 if rng is None else rng)
    keep = rng.random(x.shape, dtype=np.float32) >= np.float32(rate)
    scale = np.asarray(keep, dtype=x.dtype) * x.dtype.type(1.0 / (1.0 - rate))

    def bw(g):
        return (g * scale,)

    return record("dropout", (x,), x.data * scale, bw)


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def bw(g):
        return (g * out * (1.0 - out),)

    return record("sigmoid", (x,), out.astype(x.dtype), bw)


def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean over joints and frames of the per-joint coordinate-wise absolute error.

    For ``pred`` of shape ``(..., K, V, 3)`` this is
    ``sum |pred - target| / (prod(leading dims) * K * V)``: the absolute
    differences of the three coordinates are summed per joint, then averaged
    over every joint of every frame (and every sample of a batch).
    The subgradient at an exact tie is 0.
    """
    pred = as_tensor(pred)
    target = as_tensor(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise DimensionError(f"l1_loss: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    n = diff.size // diff.shape[-1]
    value = np.abs(diff).sum() / n

    def bw(g):
        sign = np.sign(diff) * (g / n)
        gp = sign if pred.requires_grad else None
        gt = -sign if target.requires_grad else None
        return gp, gt

    return record("l1_loss", (pred, target), np.asarray(value, dtype=pred.dtype), bw)
