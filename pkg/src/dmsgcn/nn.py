"""Parameters and a small module container with a name-keyed registry."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .errors import DimensionError
from .tensor import Tensor


class Parameter(Tensor):
    """A tracked leaf tensor with a unique dotted name.

    ``freeze_mask`` (same shape, 1 = trainable, 0 = frozen) pins individual
    entries: the optimizer never changes an entry whose mask is 0.
    """

    def __init__(self, data, name: str = "", freeze_mask=None, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        if freeze_mask is not None:
            freeze_mask = np.asarray(freeze_mask, dtype=bool)
            if freeze_mask.shape != self.shape:
                raise DimensionError(
                    f"freeze_mask shape {freeze_mask.shape} != parameter shape {self.shape}"
                )
        self.freeze_mask = freeze_mask

    @property
    def trainable_count(self) -> int:
        if self.freeze_mask is None:
            return int(self.size)
        return int(self.freeze_mask.sum())

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Module:
    """Holds parameters and child modules as attributes, torch-style."""

    training = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        seen: set[int] = set()
        for name, value in vars(self).items():
            yield from _walk(value, f"{prefix}{name}", seen)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            children = value if isinstance(value, (list, tuple)) else [value]
            for child in children:
                if isinstance(child, Module):
                    yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _walk(value, path: str, seen: set):
    if isinstance(value, Parameter):
        if id(value) not in seen:
            seen.add(id(value))
            yield path, value
    elif isinstance(value, Module):
        for name, child in vars(value).items():
            yield from _walk(child, f"{path}.{name}", seen)
    elif isinstance(value, (list, tuple)):
        for i, child in enumerate(value):
            yield from _walk(child, f"{path}.{i}", seen)


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for linear maps."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
