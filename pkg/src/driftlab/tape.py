"""Reverse-mode automatic differentiation on numpy arrays.

A Var wraps a single float64 ndarray and records, for each parent, a
vector-Jacobian callback. backward() releases gradients in one reverse
topological sweep, iteratively, so deep graphs never hit the recursion
limit.

Every op helper in this module (add, mul, matmul, tanh, ...) also
accepts plain ndarrays or floats and only tapes the Var arguments.
Forward code written against these helpers therefore runs bit-for-bit
identically with or without the tape; the sampling path and the
learning path share one set of numerics.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "Var",
    "backward",
    "value_of",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "tanh",
    "exp",
    "log",
    "vsum",
    "vmean",
    "minimum",
    "clip",
    "concatenate",
    "reshape",
    "narrow",
]


class Var:
    """One node of the tape: a value plus how to push gradients back."""

    __slots__ = ("value", "grad", "_parents", "_vjps")

    def __init__(self, value, _parents=(), _vjps=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._vjps = _vjps

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, leaf={not self._parents})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def value_of(x):
    """Underlying ndarray of a Var, or the input coerced to ndarray."""
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad, shape):
    # Sum the gradient back down to `shape` after numpy broadcasting.
    grad = np.asarray(grad, dtype=np.float64)
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _node(out, taped):
    """Build a Var from (parent, vjp) pairs, keeping only Var parents."""
    parents = tuple(p for p, _ in taped)
    vjps = tuple(v for _, v in taped)
    return Var(out, parents, vjps)


def add(a, b):
    av, bv = value_of(a), value_of(b)
    out = av + bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    taped = []
    if isinstance(a, Var):
        taped.append((a, lambda g, s=av.shape: _unbroadcast(g, s)))
    if isinstance(b, Var):
        taped.append((b, lambda g, s=bv.shape: _unbroadcast(g, s)))
    return _node(out, taped)


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    out = av - bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    taped = []
    if isinstance(a, Var):
        taped.append((a, lambda g, s=av.shape: _unbroadcast(g, s)))
    if isinstance(b, Var):
        taped.append((b, lambda g, s=bv.shape: _unbroadcast(-g, s)))
    return _node(out, taped)


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    out = av * bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    taped = []
    if isinstance(a, Var):
        taped.append((a, lambda g, o=bv, s=av.shape: _unbroadcast(g * o, s)))
    if isinstance(b, Var):
        taped.append((b, lambda g, o=av, s=bv.shape: _unbroadcast(g * o, s)))
    return _node(out, taped)


def div(a, b):
    av, bv = value_of(a), value_of(b)
    out = av / bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    taped = []
    if isinstance(a, Var):
        taped.append((a, lambda g, o=bv, s=av.shape: _unbroadcast(g / o, s)))
    if isinstance(b, Var):
        taped.append(
            (b, lambda g, n=av, o=bv, s=bv.shape: _unbroadcast(-g * n / (o * o), s))
        )
    return _node(out, taped)


def neg(a):
    if not isinstance(a, Var):
        return -value_of(a)
    return Var(-a.value, (a,), (lambda g: -g,))


def matmul(a, b):
    """2-D by 2-D matrix product. Batched inputs go in the rows."""
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {av.ndim}-D and {bv.ndim}-D")
    out = av @ bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    taped = []
    if isinstance(a, Var):
        taped.append((a, lambda g, o=bv: g @ o.T))
    if isinstance(b, Var):
        taped.append((b, lambda g, o=av: o.T @ g))
    return _node(out, taped)


def tanh(a):
    if not isinstance(a, Var):
        return np.tanh(value_of(a))
    out = np.tanh(a.value)
    return Var(out, (a,), (lambda g, o=out: g * (1.0 - o * o),))


def exp(a):
    if not isinstance(a, Var):
        return np.exp(value_of(a))
    out = np.exp(a.value)
    return Var(out, (a,), (lambda g, o=out: g * o,))


def log(a):
    if not isinstance(a, Var):
        return np.log(value_of(a))
    out = np.log(a.value)
    return Var(out, (a,), (lambda g, v=a.value: g / v,))


def vsum(a, axis=None):
    if not isinstance(a, Var):
        return np.sum(value_of(a), axis=axis)
    out = np.sum(a.value, axis=axis)

    def vjp(g, shape=a.value.shape, ax=axis):
        g = np.asarray(g, dtype=np.float64)
        if ax is None:
            return np.broadcast_to(g, shape).copy() if shape else g.reshape(())
        return np.broadcast_to(np.expand_dims(g, ax), shape).copy()

    return Var(out, (a,), (vjp,))


def vmean(a, axis=None):
    av = value_of(a)
    n = av.size if axis is None else av.shape[axis]
    return div(vsum(a, axis=axis), float(n))


def minimum(a, b):
    """Elementwise min; on ties the gradient goes to the first argument."""
    av, bv = value_of(a), value_of(b)
    out = np.minimum(av, bv)
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    take_a = av <= bv
    taped = []
    if isinstance(a, Var):
        taped.append((a, lambda g, m=take_a, s=av.shape: _unbroadcast(g * m, s)))
    if isinstance(b, Var):
        taped.append((b, lambda g, m=~take_a, s=bv.shape: _unbroadcast(g * m, s)))
    return _node(out, taped)


def clip(a, lo, hi):
    """Clamp with constant bounds; gradient passes on the closed interval."""
    av = value_of(a)
    out = np.clip(av, lo, hi)
    if not isinstance(a, Var):
        return out
    mask = (av >= lo) & (av <= hi)
    return Var(out, (a,), (lambda g, m=mask: g * m,))


def concatenate(parts, axis=0):
    vals = [value_of(p) for p in parts]
    out = np.concatenate(vals, axis=axis)
    if not any(isinstance(p, Var) for p in parts):
        return out
    taped = []
    offset = 0
    for p, v in zip(parts, vals):
        n = v.shape[axis]
        if isinstance(p, Var):

            def vjp(g, start=offset, stop=offset + n, ax=axis):
                index = [slice(None)] * g.ndim
                index[ax] = slice(start, stop)
                return g[tuple(index)]

            taped.append((p, vjp))
        offset += n
    return _node(out, taped)


def reshape(a, shape):
    if not isinstance(a, Var):
        return value_of(a).reshape(shape)
    out = a.value.reshape(shape)
    return Var(out, (a,), (lambda g, s=a.value.shape: np.asarray(g).reshape(s),))


def narrow(a, start, stop):
    """Slice [start:stop) of a 1-D vector."""
    av = value_of(a)
    if av.ndim != 1:
        raise ValueError("narrow expects a 1-D vector")
    if not isinstance(a, Var):
        return av[start:stop]
    out = a.value[start:stop]

    def vjp(g, n=av.shape[0], i=start, j=stop):
        full = np.zeros(n, dtype=np.float64)
        full[i:j] = g
        return full

    return Var(out, (a,), (vjp,))


def backward(root):
    """Accumulate d(root)/d(node) into .grad for every node under root.

    The root must be a scalar. Topological order is computed with an
    explicit stack; gradients of nodes from earlier graphs are untouched
    because every forward pass builds fresh Vars.
    """
    if not isinstance(root, Var):
        raise TypeError("backward expects a Var")
    if root.value.size != 1:
        raise ValueError("backward expects a scalar root")

    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, vjp in zip(node._parents, node._vjps):
            contribution = vjp(node.grad)
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.value)
            parent.grad = parent.grad + contribution
