"""Adam with per-entry freezing, and the step-halving learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .nn import Parameter


def lr_schedule(epoch: int, base_lr: float, every: int = 10, factor: float = 0.5) -> float:
    """``base_lr * factor ** (epoch // every)``; halves at epochs 10, 20, 30, ..."""
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    return base_lr * factor ** (epoch // every)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class Adam:
    """Bias-corrected Adam over a list of named parameters.

    After every :meth:`step` the parameters' gradients are cleared, so the
    next step needs a fresh backward pass.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params: list[Parameter] = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ContractError("parameter names must be unique")
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for p in self.params:
            self.state.m[p.name] = np.zeros_like(p.data)
            self.state.v[p.name] = np.zeros_like(p.data)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = float(value)

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def adam_step(params, state: AdamState) -> None:
    for p in params:
        if p.grad is None:
            raise ContractError(f"parameter {p.name!r} has no gradient")
        if state.m[p.name].shape != p.shape:
            raise ContractError(f"optimizer state for {p.name!r} has the wrong shape")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for p in params:
        g = p.grad
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = (state.lr / bc1) * m / (np.sqrt(v / bc2) + state.eps)
        if p.freeze_mask is None:
            p.data -= update.astype(p.dtype, copy=False)
        else:
            np.subtract(p.data, update.astype(p.dtype, copy=False), out=p.data, where=p.freeze_mask)
        p.grad = None
