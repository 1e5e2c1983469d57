"""Dense 2-D tensors with tape-based reverse-mode differentiation.

Every op returns a new :class:`Tensor` that remembers its parents and a
backward rule. :func:`backward` linearizes the graph reachable from a scalar
root into a :class:`ComputationTape` (topological order) and replays it in
reverse, accumulating into ``.grad``. Gradients accumulate across calls until
:func:`zero_grad` is called.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DataError(ValueError):
    """Input values violate an op's domain (e.g. label out of range)."""


class UsageError(RuntimeError):
    """An API was called in an invalid state."""


_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Evaluate without recording (per thread)."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got array of shape {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"

    @classmethod
    def _result(cls, data: np.ndarray, parents: Sequence["Tensor"], op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        out.requires_grad = grad_enabled() and any(p.requires_grad for p in parents)
        out._parents = tuple(parents) if out.requires_grad else ()
        out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor._result(a.data @ b.data, (a, b), "matmul")
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        out._backward = _backward
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor._result(np.ascontiguousarray(a.data.T), (a,), "transpose")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g.T)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a 1 x cols row or rows x 1 column."""
    a, b = _as_tensor(a), _as_tensor(b)
    (ra, ca), (rb, cb) = a.shape, b.shape
    if (rb, cb) != (ra, ca) and not ((rb == 1 and cb == ca) or (cb == 1 and rb == ra)):
        raise DimensionError(f"add shape mismatch: {a.shape} + {b.shape}")
    out = Tensor._result(a.data + b.data, (a, b), "add")
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                if rb == ra and cb == ca:
                    b._accumulate(g)
                elif rb == 1:
                    b._accumulate(g.sum(axis=0, keepdims=True))
                else:
                    b._accumulate(g.sum(axis=1, keepdims=True))
        out._backward = _backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"mul shape mismatch: {a.shape} * {b.shape}")
    out = Tensor._result(a.data * b.data, (a, b), "mul")
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(g * b.data)
            if b.requires_grad:
                b._accumulate(g * a.data)
        out._backward = _backward
    return out


def tensor_sum(a: Tensor) -> Tensor:
    out = Tensor._result(np.array([[a.data.sum()]]), (a,), "sum")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(np.full_like(a.data, g[0, 0]))
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows; pick the matching algebraic form per sign.
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def silu(x: Tensor) -> Tensor:
    sig = _sigmoid(x.data)
    out = Tensor._result(x.data * sig, (x,), "silu")
    if out.requires_grad:
        def _backward(g):
            x._accumulate(g * sig * (1.0 + x.data * (1.0 - sig)))
        out._backward = _backward
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, c = logits.shape
    if n < 1:
        raise DimensionError("softmax_cross_entropy needs at least one row")
    if labels.shape[0] != n:
        raise DimensionError(f"{labels.shape[0]} labels for {n} logit rows")
    bad = np.flatnonzero((labels < 0) | (labels >= c))
    if bad.size:
        raise DataError(f"label {labels[bad[0]]} at row {bad[0]} outside [0, {c})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsumexp - z[rows, labels]))
    out = Tensor._result(np.array([[loss]]), (logits,), "softmax_cross_entropy")
    if out.requires_grad:
        def _backward(g):
            p = np.exp(z - logsumexp[:, None])
            p[rows, labels] -= 1.0
            logits._accumulate(g[0, 0] * p / n)
        out._backward = _backward
    return out


def bspline_basis(x: Tensor, knots: np.ndarray, order: int) -> Tensor:
    """B-spline features of every column of ``x``.

    Returns a ``B x (n * n_basis)`` tensor laid out feature-major: columns
    ``i*n_basis : (i+1)*n_basis`` hold the basis values of input column ``i``.
    """
    b, n = x.shape
    basis, dbasis = kernels.bspline_basis(x.data, knots, order)
    nb = basis.shape[2]
    out = Tensor._result(basis.reshape(b, n * nb), (x,), "bspline_basis")
    if out.requires_grad:
        def _backward(g):
            x._accumulate(np.einsum("bij,bij->bi", g.reshape(b, n, nb), dbasis))
        out._backward = _backward
    return out


class ComputationTape(list):
    """Recorded op nodes in topological order (inputs before outputs)."""


def build_tape(root: Tensor) -> ComputationTape:
    tape = ComputationTape()
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            tape.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return tape


def backward(root: Tensor) -> ComputationTape:
    """Accumulate d(root)/d(leaf) into every reachable ``requires_grad`` leaf."""
    if root.shape != (1, 1):
        raise UsageError(f"backward() needs a scalar root, got shape {root.shape}")
    tape = build_tape(root)
    # Interior nodes borrow .grad as a scratch accumulator for the pass.
    interior = [node for node in tape if node._backward is not None]
    for node in interior:
        node.grad = None
    if root.requires_grad:
        root._accumulate(np.ones((1, 1)))
    try:
        for node in reversed(interior):
            if node.grad is not None:
                node._backward(node.grad)
    finally:
        for node in interior:
            node.grad = None
    return tape


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None if p.grad is None else np.zeros_like(p.data)
