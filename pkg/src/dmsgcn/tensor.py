"""Dense tensors with tape-based reverse-mode differentiation.

Every differentiable operation that touches a tracked tensor appends a
:class:`Node` to the current thread's :class:`Tape`.  :func:`backward` replays
the tape in exact reverse construction order and accumulates gradients into
the ``grad`` buffers of tracked leaf tensors (parameters and user inputs).

Gradients accumulate: calling :func:`backward` twice on the same tape without
zeroing doubles every leaf gradient.  :meth:`dmsgcn.optim.Adam.step` clears
them after each update.

Setting the environment variable ``DMSGCN_DEBUG_NAN=1`` (or calling
:func:`set_debug_nan`) makes every forward op verify that its output is
finite whenever its inputs were.
"""

from __future__ import annotations

import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NumericalError

DEFAULT_DTYPE = np.float32

_debug_nan = os.environ.get("DMSGCN_DEBUG_NAN", "") not in ("", "0")


def set_debug_nan(enabled: bool) -> None:
    global _debug_nan
    _debug_nan = bool(enabled)


@dataclass(eq=False)
class Node:
    op: str
    inputs: tuple
    out: "Tensor"
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass(eq=False)
class Tape:
    """Ordered record of the ops executed since the last :meth:`clear`."""

    nodes: list = field(default_factory=list)

    def clear(self) -> None:
        for node in self.nodes:
            node.out._node = None
        self.nodes.clear()

    def __len__(self) -> int:
        return len(self.nodes)


_state = threading.local()


def get_tape() -> Tape:
    tape = getattr(_state, "tape", None)
    if tape is None:
        tape = _state.tape = Tape()
    return tape


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def use_tape(tape: Tape):
    """Record into ``tape`` for the duration of the block."""
    prev = getattr(_state, "tape", None)
    _state.tape = tape
    try:
        yield tape
    finally:
        _state.tape = prev


@contextmanager
def no_grad():
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


def _as_array(data, dtype) -> np.ndarray:
    arr = np.asarray(data)
    # asarray(order="C") rather than ascontiguousarray, which turns 0-d into 1-d
    if dtype is not None:
        return np.asarray(arr, dtype=dtype, order="C")
    if arr.dtype.kind != "f":
        return np.asarray(arr, dtype=DEFAULT_DTYPE, order="C")
    return np.asarray(arr, order="C")


class Tensor:
    """Row-major real array with an optional gradient buffer.

    ``requires_grad`` marks the tensor as tracked; tracked leaves receive
    gradients from :func:`backward`.  Outputs of recorded ops are tracked
    automatically.
    """

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._node: Node | None = None

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return permute(self, axes)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _coerce(a, b):
    """Wrap python/numpy constants so that they match the other operand's dtype."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return a, b


def record(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, backward_fn) -> Tensor:
    """Wrap ``out_data`` in a Tensor and put it on the tape if any input is tracked."""
    out = Tensor(out_data, dtype=out_data.dtype)
    if _debug_nan and not np.all(np.isfinite(out_data)):
        if all(np.all(np.isfinite(t.data)) for t in inputs):
            raise NumericalError(f"{op} produced non-finite values from finite inputs")
    if _grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        node = Node(op, tuple(inputs), out, backward_fn)
        out._node = node
        get_tape().nodes.append(node)
    return out


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy-style broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- elementwise arithmetic ------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _check_broadcast("add", a, b)

    def bw(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return record("add", (a, b), a.data + b.data, bw)


def sub(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _check_broadcast("sub", a, b)

    def bw(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return record("sub", (a, b), a.data - b.data, bw)


def mul(a, b) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    a, b = _coerce(a, b)
    _check_broadcast("mul", a, b)

    def bw(g):
        ga = unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return record("mul", (a, b), a.data * b.data, bw)


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, leading axes broadcast.

    For 2-D operands this is the plain ``m x k @ k x n`` product.
    """
    a, b = _coerce(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}") from None

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            if a.ndim == 2 and b.ndim > 2:
                # contract every axis but the row axis in one GEMM
                axes = [i for i in range(g.ndim) if i != g.ndim - 2]
                ga = np.tensordot(g, b.data, axes=(axes, axes))
            else:
                ga = unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                k, n = b.shape
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            else:
                gb = unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return record("matmul", (a, b), np.matmul(a.data, b.data), bw)


# -- shape manipulation ----------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}") from None
    return record("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def permute(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise DimensionError(f"permute: axes {axes} invalid for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(np.transpose(a.data, axes))
    return record("permute", (a,), out, lambda g: (np.transpose(g, inverse),))


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return permute(a, axes)


def getitem(a: Tensor, index) -> Tensor:
    out = np.array(a.data[index])

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return record("getitem", (a,), out, bw)


# -- reductions ------------------------------------------------------------

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims))

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record("sum", (a,), out, bw)


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis), 1.0 / float(n))


def backward(loss: Tensor) -> None:
    """Populate ``grad`` of every tracked leaf that ``loss`` depends on."""
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tracked tensor")
    if loss.is_leaf:
        one = np.ones_like(loss.data)
        loss.grad = one if loss.grad is None else loss.grad + one
        return
    tape = get_tape()
    if not any(node is loss._node for node in tape.nodes):
        raise ContractError("loss was not recorded on the current tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp.is_leaf:
                gi = np.asarray(gi, dtype=inp.dtype)
                inp.grad = gi.copy() if inp.grad is None else inp.grad + gi
            else:
                key = id(inp)
                grads[key] = gi if key not in grads else grads[key] + gi
