"""The fixed op set.

Every function accepts nodes, arrays or python scalars. The result is a node
when any operand is a node, otherwise a plain array.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .tape import Array, ShapeError, record, value_of

OP_KINDS = (
    "affine", "relu", "tanh", "softmax", "log", "add", "sub", "mul",
    "sq_norm", "reduce_sum", "reduce_mean", "concat", "stop_gradient",
)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def affine(x: Any, w: Any, b: Any):
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    if wv.ndim != 2 or xv.shape[-1] != wv.shape[0] or bv.shape != (wv.shape[1],):
        raise ShapeError(
            f"affine: input {xv.shape} x weight {wv.shape} + bias {bv.shape} incompatible"
        )
    out = xv @ wv + bv
    fan_in, fan_out = wv.shape

    def gx(g):
        return g @ wv.T

    def gw(g):
        return xv.reshape(-1, fan_in).T @ g.reshape(-1, fan_out)

    def gb(g):
        return g.reshape(-1, fan_out).sum(axis=0)

    return record("affine", (x, w, b), out, (gx, gw, gb))


def relu(x: Any):
    xv = value_of(x)
    out = np.maximum(xv, 0.0)
    return record("relu", (x,), out, (lambda g: g * (xv > 0),))


def tanh(x: Any):
    out = np.tanh(value_of(x))
    return record("tanh", (x,), out, (lambda g: g * (1.0 - out * out),))


def softmax(x: Any):
    """Softmax over the last axis."""
    xv = value_of(x)
    z = np.exp(xv - xv.max(axis=-1, keepdims=True))
    out = z / z.sum(axis=-1, keepdims=True)

    def vjp(g):
        return out * (g - (g * out).sum(axis=-1, keepdims=True))

    return record("softmax", (x,), out, (vjp,))


def log(x: Any):
    xv = value_of(x)
    if np.any(xv <= 0):
        raise ValueError("log of a non-positive value")
    return record("log", (x,), np.log(xv), (lambda g: g / xv,))


def add(a: Any, b: Any):
    av, bv = value_of(a), value_of(b)
    out = av + bv
    return record("add", (a, b), out,
                  (lambda g: _unbroadcast(g, av.shape), lambda g: _unbroadcast(g, bv.shape)))


def sub(a: Any, b: Any):
    av, bv = value_of(a), value_of(b)
    out = av - bv
    return record("sub", (a, b), out,
                  (lambda g: _unbroadcast(g, av.shape), lambda g: -_unbroadcast(g, bv.shape)))


def mul(a: Any, b: Any):
    av, bv = value_of(a), value_of(b)
    out = av * bv
    return record("mul", (a, b), out,
                  (lambda g: _unbroadcast(g * bv, av.shape), lambda g: _unbroadcast(g * av, bv.shape)))


def sq_norm(x: Any, axis: int = -1):
    """Squared L2 norm along ``axis``."""
    xv = value_of(x)
    out = np.sum(xv * xv, axis=axis)
    return record("sq_norm", (x,), out, (lambda g: 2.0 * xv * np.expand_dims(g, axis),))


def reduce_sum(x: Any, axis: int | None = None):
    xv = value_of(x)
    out = np.sum(xv, axis=axis)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, xv.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), xv.shape).copy()

    return record("reduce_sum", (x,), np.asarray(out), (vjp,))


def reduce_mean(x: Any, axis: int | None = None):
    xv = value_of(x)
    n = xv.size if axis is None else xv.shape[axis]
    out = np.mean(xv, axis=axis)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g / n, xv.shape).copy()
        return np.broadcast_to(np.expand_dims(g / n, axis), xv.shape).copy()

    return record("reduce_mean", (x,), np.asarray(out), (vjp,))


def concat(xs: Sequence[Any], axis: int = -1):
    vals = [value_of(x) for x in xs]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def make(i):
        def vjp(g):
            return np.split(g, bounds, axis=axis)[i]
        return vjp

    return record("concat", tuple(xs), out, tuple(make(i) for i in range(len(xs))))


def stop_gradient(x: Any):
    """Identity in the forward pass, zero gradient in the backward pass."""
    return record("stop_gradient", (x,), value_of(x).copy(), (None,))
