"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError
from .functional import make_rng
from .tensor import Tape, Tensor, backward, no_grad, use_tape


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def _scalarize(out: Tensor, weights: np.ndarray | None) -> Tensor:
    if out.size == 1:
        return out.reshape(())
    return (out * weights).sum()


def finite_diff_check(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
    report: dict | None = None,
) -> float:
    """Maximum relative error between backprop and central differences.

    ``f(*inputs)`` may return a tensor of any shape; non-scalar outputs are
    contracted with fixed random weights.  Inputs must be float64 leaves;
    they are perturbed in place and restored.  ``max_entries`` limits the
    number of (randomly chosen) entries checked per input.

    A step that straddles a PReLU kink shows up as disagreeing one-sided
    differences.  Such entries are retried with steps ten and a hundred times
    smaller; if every step still straddles a kink the entry is left out and
    counted in ``report["kinks"]``.  ``report["checked"]`` counts the rest.
    """
    for x in inputs:
        if x.dtype != np.float64:
            raise ContractError("finite_diff_check needs float64 inputs")
    rng = make_rng(seed)

    saved = [x.requires_grad for x in inputs]
    for x in inputs:
        x.requires_grad = True
        x.grad = None

    tape = Tape()
    with use_tape(tape):
        out = f(*inputs)
        weights = None if out.size == 1 else rng.standard_normal(out.shape)
        loss = _scalarize(out, weights)
        backward(loss)
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs]
    tape.clear()

    def value() -> float:
        with no_grad():
            return float(_scalarize(f(*inputs), weights).data)

    base = value()
    if value() != base or base != float(loss.data):
        raise ContractError("function under check is not deterministic")

    worst = 0.0
    checked = kinks = 0
    for x, grad in zip(inputs, analytic):
        flat = x.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        gflat = grad.reshape(-1)
        for i in idx:
            numeric = None
            for step in (eps, eps / 10, eps / 100):
                numeric = _central(value, flat, i, step, base)
                if numeric is not None:
                    break
            if numeric is None:
                kinks += 1
                continue
            checked += 1
            worst = max(worst, float(relative_error(gflat[i], numeric)))

    for x, flag in zip(inputs, saved):
        x.requires_grad = flag
        x.grad = None
    if report is not None:
        report.update(checked=checked, kinks=kinks)
    return worst


def _central(value, flat, i, step, base, smooth_tol=1e-4):
    """Central difference at ``flat[i]``, or ``None`` at a non-smooth point."""
    orig = flat[i]
    flat[i] = orig + step
    hi = value()
    flat[i] = orig - step
    lo = value()
    flat[i] = orig
    fwd = (hi - base) / step
    bwd = (base - lo) / step
    if abs(fwd - bwd) > smooth_tol * (abs(fwd) + abs(bwd)) + 1e-6:
        return None
    return (hi - lo) / (2.0 * step)
