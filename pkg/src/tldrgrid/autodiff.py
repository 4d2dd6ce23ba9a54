"""Minimal reverse-mode automatic differentiation over numpy arrays.

Supports exactly the primitive set needed by the training losses:
affine maps (matmul + bias add), rectifier, softplus, Euclidean norm,
mean/sum reductions, elementwise min/max against constants, and basic
arithmetic. Everything is float64.
"""

from __future__ import annotations

import numpy as np


class UnsupportedPrimitiveError(TypeError):
    """Raised when a computation graph uses an operation we cannot differentiate."""


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # sum out prepended axes
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Node in the computation tape. Wraps a float64 ndarray."""

    __slots__ = ("data", "grad", "_parents", "_grad_fn")

    def __init__(self, data, parents=(), grad_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._grad_fn = grad_fn

    @property
    def shape(self):
        return self.data.shape

    # ---- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out = Tensor(self.data + other.data, (self, other))
        out._grad_fn = lambda g: (_unbroadcast(g, self.data.shape),
                                  _unbroadcast(g, other.data.shape))
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))
        out._grad_fn = lambda g: (-g,)
        return out

    def __sub__(self, other):
        other = _wrap(other)
        out = Tensor(self.data - other.data, (self, other))
        out._grad_fn = lambda g: (_unbroadcast(g, self.data.shape),
                                  _unbroadcast(-g, other.data.shape))
        return out

    def __rsub__(self, other):
        return _wrap(other) - self

    def __mul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data * other.data, (self, other))
        out._grad_fn = lambda g: (_unbroadcast(g * other.data, self.data.shape),
                                  _unbroadcast(g * self.data, other.data.shape))
        return out

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise UnsupportedPrimitiveError("division between tensors is not supported")
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data @ other.data, (self, other))

        def grad_fn(g):
            a, b = self.data, other.data
            if a.ndim == 1:
                ga = g @ b.T
            else:
                ga = g @ b.T
            if a.ndim == 1:  # (d,) @ (d, k)
                gb = np.outer(a, g)
            else:
                gb = a.T @ g
            return ga, gb

        out._grad_fn = grad_fn
        return out

    # ---- nonlinearities ---------------------------------------------------

    def relu(self):
        mask = self.data > 0
        out = Tensor(np.where(mask, self.data, 0.0), (self,))
        out._grad_fn = lambda g: (g * mask,)
        return out

    def softplus(self, beta=1.0):
        """(1/beta) * log(1 + exp(beta * x)), numerically stable."""
        z = beta * self.data
        val = (np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))) / beta
        sig = 1.0 / (1.0 + np.exp(-z))
        out = Tensor(val, (self,))
        out._grad_fn = lambda g: (g * sig,)
        return out

    def square(self):
        out = Tensor(self.data ** 2, (self,))
        out._grad_fn = lambda g: (g * 2.0 * self.data,)
        return out

    # ---- reductions -------------------------------------------------------

    def sum(self, axis=None):
        out = Tensor(self.data.sum(axis=axis), (self,))

        def grad_fn(g):
            if axis is None:
                return (np.broadcast_to(g, self.data.shape).copy(),)
            g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.data.shape).copy(),)

        out._grad_fn = grad_fn
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) / n

    def l2norm(self, axis=-1):
        """Euclidean norm along `axis`; subgradient 0 at the origin."""
        norm = np.sqrt((self.data ** 2).sum(axis=axis))
        out = Tensor(norm, (self,))

        def grad_fn(g):
            safe = np.where(norm == 0.0, 1.0, norm)
            scale = np.expand_dims(g / safe, axis)
            return (scale * self.data,)

        out._grad_fn = grad_fn
        return out

    # ---- clamping ---------------------------------------------------------

    def minimum(self, const):
        """Elementwise min(x, const) for a constant bound."""
        c = np.asarray(const, dtype=np.float64)
        mask = self.data < c
        out = Tensor(np.minimum(self.data, c), (self,))
        out._grad_fn = lambda g: (g * mask,)
        return out

    def maximum(self, const):
        c = np.asarray(const, dtype=np.float64)
        mask = self.data > c
        out = Tensor(np.maximum(self.data, c), (self,))
        out._grad_fn = lambda g: (g * mask,)
        return out

    def clamp(self, lo, hi):
        return self.maximum(lo).minimum(hi)

    # ---- backward pass ----------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every tape node."""
        if self.data.ndim != 0:
            raise ValueError("backward() requires a scalar loss")
        order = []
        seen = set()

        def topo(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            for p in node._parents:
                topo(p)
            order.append(node)

        topo(self)
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._grad_fn is None:
                continue
            grads = node._grad_fn(node.grad)
            for parent, g in zip(node._parents, grads):
                np.add(parent.grad, g, out=parent.grad)


def _wrap(x):
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float, np.ndarray, np.floating, np.integer)):
        return Tensor(np.asarray(x, dtype=np.float64))
    raise UnsupportedPrimitiveError(f"cannot use {type(x).__name__} in the tape")


def constant(x):
    """A tape leaf that receives no gradient."""
    return Tensor(np.asarray(x, dtype=np.float64))
