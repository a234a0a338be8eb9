"""Tensor node and the reverse-mode backward pass."""
import contextlib

import numpy as np

from ..errors import DimensionError, NumericError

_DEBUG = False
_GRAD_ENABLED = True


def set_debug(flag):
    """Enable finiteness checks on every tensor built (slow)."""
    global _DEBUG
    _DEBUG = bool(flag)


@contextlib.contextmanager
def debug_mode():
    old = _DEBUG
    set_debug(True)
    try:
        yield
    finally:
        set_debug(old)


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording the graph (inference)."""
    global _GRAD_ENABLED
    old = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = old


def grad_enabled():
    return _GRAD_ENABLED


class Tensor:
    """N-dimensional float64 array that records how it was computed.

    Parameters
    ----------
    data : array_like
        Values; always stored as a float64 ndarray.
    requires_grad : bool
        Whether ``grad`` is accumulated for this node on ``backward()``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_prev", "_backward", "op")

    def __init__(self, data, requires_grad=False, _prev=(), op=""):
        data = np.asarray(data, dtype=np.float64)
        if _DEBUG and not np.all(np.isfinite(data)):
            raise NumericError(f"non-finite value produced by {op or 'constructor'}")
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._prev = _prev
        self._backward = None
        self.op = op

    # -- construction helpers -------------------------------------------
    @classmethod
    def _result(cls, data, parents, op):
        parents = tuple(p for p in parents if isinstance(p, Tensor))
        track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        return cls(data, requires_grad=track, _prev=parents if track else (), op=op)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if g.shape != self.data.shape:
            raise DimensionError(f"gradient shape {g.shape} != tensor shape {self.data.shape}")
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable ``requires_grad`` leaf."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._prev, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # -- elementwise arithmetic -----------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -other if not isinstance(other, Tensor) else mul(other, -1.0))

    def sum(self):
        return sum_all(self)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor._result(a.data + b.data, (a, b), "add")
    if out.requires_grad:
        out._backward = lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor._result(a.data * b.data, (a, b), "mul")
    if out.requires_grad:
        out._backward = lambda g: (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        )
    return out


def sum_all(x):
    out = Tensor._result(np.sum(x.data), (x,), "sum")
    if out.requires_grad:
        out._backward = lambda g: (np.broadcast_to(g, x.shape).copy(),)
    return out


def mean(x, axis=None):
    """Mean over ``axis`` (int, tuple or None for all)."""
    data = x.data.mean(axis=axis)
    count = x.size // max(np.size(data), 1)
    out = Tensor._result(data, (x,), "mean")
    if out.requires_grad:
        def backward(g):
            g = np.asarray(g)
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g / count, x.shape).copy(),)

        out._backward = backward
    return out


def reshape(x, shape):
    out = Tensor._result(x.data.reshape(shape), (x,), "reshape")
    if out.requires_grad:
        out._backward = lambda g: (g.reshape(x.shape),)
    return out


def flatten(x):
    """Collapse everything after the batch axis: [B, ...] -> [B, N]."""
    return reshape(x, (x.shape[0], -1))


def square(x):
    out = Tensor._result(x.data * x.data, (x,), "square")
    if out.requires_grad:
        out._backward = lambda g: (2.0 * x.data * g,)
    return out


def log(x, floor=1e-6):
    """Natural log of ``max(x, floor)``; zero gradient where clamped."""
    clamped = np.maximum(x.data, floor)
    out = Tensor._result(np.log(clamped), (x,), "log")
    if out.requires_grad:
        out._backward = lambda g: (np.where(x.data > floor, g / clamped, 0.0),)
    return out
