"""Reverse-mode autodiff over float64 numpy arrays.

A :class:`Value` wraps an array and remembers the op that produced it.
``backward(root)`` walks the recorded graph once in reverse topological order.
Only what the SDF network needs is here: no general broadcasting, just the
row-broadcast of a bias-like vector.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError, ShapeError


class Value:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Value{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __mul__(self, c):
        if isinstance(c, Value):
            return mul(self, c)
        return scale(self, c)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def parameter(data, name=None):
    return Value(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def constant(data):
    return data if isinstance(data, Value) else Value(data)


def _node(data, parents, backward):
    req = any(p.requires_grad for p in parents)
    return Value(data, requires_grad=req, _parents=parents if req else (), _backward=backward if req else None)


def _accumulate(v, g):
    if not v.requires_grad:
        return
    if v.grad is None:
        v.grad = np.array(g, dtype=np.float64)
    else:
        v.grad += g


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- ops ---------------------------------------------------------------------

def add(a, b):
    a, b = constant(a), constant(b)
    _same_shape(a, b, "add")

    def back(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _node(a.data + b.data, (a, b), back)


def sub(a, b):
    a, b = constant(a), constant(b)
    _same_shape(a, b, "sub")

    def back(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _node(a.data - b.data, (a, b), back)


def mul(a, b):
    a, b = constant(a), constant(b)
    _same_shape(a, b, "mul")

    def back(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _node(a.data * b.data, (a, b), back)


def scale(a, c):
    a = constant(a)
    c = float(c)
    return _node(a.data * c, (a,), lambda g: _accumulate(a, g * c))


def matmul(a, b):
    a, b = constant(a), constant(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")

    def back(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _node(a.data @ b.data, (a, b), back)


def add_bias(a, b):
    """``a`` (n, m) plus row vector ``b`` (m,) or (1, m) on every row."""
    a, b = constant(a), constant(b)
    if a.data.ndim != 2 or b.data.size != a.shape[1] or b.data.ndim > 2 or (b.data.ndim == 2 and b.shape[0] != 1):
        raise ShapeError(f"add_bias: shapes {a.shape} and {b.shape} are incompatible")
    row = b.data.reshape(1, -1)

    def back(g):
        _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=0).reshape(b.shape))

    return _node(a.data + row, (a, b), back)


def relu(a):
    a = constant(a)
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: _accumulate(a, g * mask))


def sin(a):
    a = constant(a)
    return _node(np.sin(a.data), (a,), lambda g: _accumulate(a, g * np.cos(a.data)))


def cos(a):
    a = constant(a)
    return _node(np.cos(a.data), (a,), lambda g: _accumulate(a, -g * np.sin(a.data)))


def clip(a, lo, hi):
    """Clamp to [lo, hi]; the gradient is zero where the clamp is active."""
    a = constant(a)
    inside = (a.data > lo) & (a.data < hi)
    return _node(np.clip(a.data, lo, hi), (a,), lambda g: _accumulate(a, g * inside))


def reshape(a, shape):
    a = constant(a)
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: _accumulate(a, g.reshape(old)))


def concat(values, axis=1):
    values = [constant(v) for v in values]
    if not values:
        raise ShapeError("concat: nothing to concatenate")
    ref = values[0].shape
    for v in values[1:]:
        if v.data.ndim != len(ref) or any(s != r for i, (s, r) in enumerate(zip(v.shape, ref)) if i != axis % len(ref)):
            raise ShapeError(f"concat: shapes {ref} and {v.shape} are incompatible along axis {axis}")
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]

    def back(g):
        for v, part in zip(values, np.split(g, sizes, axis=axis)):
            _accumulate(v, part)

    return _node(np.concatenate([v.data for v in values], axis=axis), tuple(values), back)


def mean_abs(a):
    a = constant(a)
    n = a.data.size

    def back(g):
        _accumulate(a, g * np.sign(a.data) / n)

    return _node(np.abs(a.data).mean(), (a,), back)


def sum_sq(a):
    a = constant(a)
    return _node(np.sum(a.data * a.data), (a,), lambda g: _accumulate(a, 2.0 * g * a.data))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of integer ``labels`` under row-wise softmax of ``logits``."""
    logits = constant(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.data.ndim != 2 or len(labels) != logits.shape[0]:
        raise ShapeError(f"softmax_cross_entropy: logits {logits.shape} and labels {labels.shape} are incompatible")
    if len(labels) and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ShapeError(f"softmax_cross_entropy: label out of range for {logits.shape[1]} classes")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(labels))
    loss = np.mean(logsum - z[rows, labels])

    def back(g):
        p = np.exp(z - logsum[:, None])
        p[rows, labels] -= 1.0
        _accumulate(logits, g * p / len(labels))

    return _node(loss, (logits,), back)


# -- backward ------------------------------------------------------------------

def _topo(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root, params=()):
    """Populate ``.grad`` of every leaf reachable from the scalar ``root``.

    Leaves in ``params`` that the root does not depend on get a zero grad.
    Gradients must be cleared between calls; stale ones raise.
    """
    if root.data.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
    order = _topo(root)
    for node in order:
        if node.grad is not None:
            raise ContractError("gradients were not zeroed since the last backward pass")
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


def zero_grad(params):
    for p in params:
        p.grad = None
