"""Reverse-mode differentiation tape over numpy arrays.

A Tensor wraps an ndarray and, when any input of an operation requires a
gradient, records a closure that scatters the output cotangent back to its
parents.  `backward(loss)` runs those closures in reverse topological
order.  Gradients accumulate into `.grad`; leaves created with
``requires_grad=True`` start with a zero gradient so that leaves a loss
does not reach report exactly zero.

Layout convention for network tensors is (batch, height, width, channels);
the elementwise ops below work on any shape and broadcast like numpy.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, TapeError


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = np.asarray(values)
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError(f"tensor {name or ''} has non-finite values")
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.values) if self.requires_grad else None
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.values)

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad}, name={self.name!r})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)


def from_op(values: np.ndarray, parents, backward_fn) -> Tensor:
    """Internal node constructor (skips the leaf finiteness scan)."""
    t = Tensor.__new__(Tensor)
    t.values = values
    t.requires_grad = any(p.requires_grad for p in parents)
    t.grad = None
    t.name = None
    t._parents = tuple(parents)
    t._backward = backward_fn if t.requires_grad else None
    return t


def accumulate(t: Tensor, g: np.ndarray) -> None:
    """Add a cotangent contribution into t.grad (no-op without grad)."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted cotangent back to the original operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _topo_from(root: Tensor) -> list[Tensor]:
    """Nodes reachable from root, topologically sorted (root last)."""
    WHITE, GRAY, BLACK = 0, 1, 2
    state: dict[int, int] = {}
    order: list[Tensor] = []
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            state[id(node)] = BLACK
            order.append(node)
            continue
        if state.get(id(node), WHITE) != WHITE:
            continue
        state[id(node)] = GRAY
        stack.append((node, True))
        for p in node._parents:
            s = state.get(id(p), WHITE)
            if s == GRAY:
                raise TapeError("cycle in differentiation tape")
            if s == WHITE:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable requires_grad leaf."""
    if loss.values.size != 1:
        raise InvalidArgumentError(f"loss must be scalar, got shape {loss.values.shape}")
    order = _topo_from(loss)
    if loss.grad is None:
        loss.grad = np.zeros_like(loss.values)
    loss.grad += np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def constant(values, name: str | None = None) -> Tensor:
    return Tensor(values, requires_grad=False, name=name)


def parameter(values, name: str | None = None) -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = a.values + b

        def bw(g):
            accumulate(a, g)

        return from_op(out, (a,), bw)
    out = a.values + b.values

    def bw(g):
        accumulate(a, _unbroadcast(g, a.values.shape))
        accumulate(b, _unbroadcast(g, b.values.shape))

    return from_op(out, (a, b), bw)


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = a.values - b

        def bw(g):
            accumulate(a, g)

        return from_op(out, (a,), bw)
    out = a.values - b.values

    def bw(g):
        accumulate(a, _unbroadcast(g, a.values.shape))
        accumulate(b, _unbroadcast(-g, b.values.shape))

    return from_op(out, (a, b), bw)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = a.values * b

        def bw(g):
            accumulate(a, g * b)

        return from_op(out, (a,), bw)
    out = a.values * b.values

    def bw(g):
        accumulate(a, _unbroadcast(g * b.values, a.values.shape))
        accumulate(b, _unbroadcast(g * a.values, b.values.shape))

    return from_op(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    def bw(g):
        accumulate(a, -g)

    return from_op(-a.values, (a,), bw)


def relu(x: Tensor) -> Tensor:
    """max(x, 0); the subgradient at 0 is taken as 0."""
    mask = x.values > 0

    def bw(g):
        accumulate(x, g * mask)

    return from_op(np.maximum(x.values, 0), (x,), bw)


def sum_all(x: Tensor) -> Tensor:
    """Sum of every element, as a scalar tensor."""

    def bw(g):
        accumulate(x, np.broadcast_to(g, x.values.shape))

    return from_op(np.asarray(x.values.sum()), (x,), bw)


def concat(tensors, axis: int) -> Tensor:
    tensors = tuple(tensors)
    out = np.concatenate([t.values for t in tensors], axis=axis)
    sizes = [t.values.shape[axis] for t in tensors]
    edges = np.concatenate([[0], np.cumsum(sizes)])

    def bw(g):
        for t, start, size in zip(tensors, edges[:-1], sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(int(start), int(start) + size)
            accumulate(t, g[tuple(sl)])

    return from_op(out, tensors, bw)


def narrow(x: Tensor, axis: int, start: int, size: int) -> Tensor:
    """Contiguous slice [start, start+size) along one axis."""
    sl = [slice(None)] * x.values.ndim
    sl[axis] = slice(start, start + size)
    sl = tuple(sl)
    if start < 0 or start + size > x.values.shape[axis]:
        raise InvalidArgumentError("narrow slice out of range")

    def bw(g):
        full = np.zeros_like(x.values)
        full[sl] = g
        accumulate(x, full)

    return from_op(x.values[sl].copy(), (x,), bw)
