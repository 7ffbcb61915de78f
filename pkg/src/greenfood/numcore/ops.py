"""Differentiable operations over :class:`Tensor`.

Every op computes its value with numpy and registers a closure that maps
the output gradient to input gradients. Broadcasting follows numpy rules;
gradients are summed back to each input's shape.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .tensor import DegenerateMaskError, ShapeError, Tensor, as_tensor, record


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def identity(x: Tensor) -> Tensor:
    return record("identity", x.value, (x,), lambda g: (g,))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return record("add", a.value + b.value, (a, b),
                  lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return record("sub", a.value - b.value, (a, b),
                  lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    return record("mul", av * bv, (a, b),
                  lambda g: (unbroadcast(g * bv, av.shape), unbroadcast(g * av, bv.shape)))


def neg(x: Tensor) -> Tensor:
    return record("neg", -x.value, (x,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, batch axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply shapes {av.shape} and {bv.shape}")

    def back(g):
        ga = np.matmul(g, np.swapaxes(bv, -1, -2))
        gb = np.matmul(np.swapaxes(av, -1, -2), g)
        return unbroadcast(ga, av.shape), unbroadcast(gb, bv.shape)

    return record("matmul", np.matmul(av, bv), (a, b), back)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.value)
    return record("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def log_sigmoid(x: Tensor) -> Tensor:
    """log(sigmoid(x)), stable for large |x|."""
    v = x.value
    out = -np.logaddexp(0.0, -v)
    return record("log_sigmoid", out, (x,), lambda g: (g * _sigmoid(-v),))


def relu(x: Tensor) -> Tensor:
    on = x.value > 0
    return record("relu", np.where(on, x.value, 0.0), (x,), lambda g: (g * on,))


def exp(x: Tensor) -> Tensor:
    e = np.exp(x.value)
    return record("exp", e, (x,), lambda g: (g * e,))


def log(x: Tensor) -> Tensor:
    v = x.value
    return record("log", np.log(v), (x,), lambda g: (g / v,))


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = x.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return record("sum", np.asarray(x.value.sum(axis=axis, keepdims=keepdims)), (x,), back)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    return record("reshape", x.value.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return record("transpose", np.transpose(x.value, axes), (x,),
                  lambda g: (np.transpose(g, inv),))


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def getitem(x: Tensor, index) -> Tensor:
    shape = x.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)

    return record("getitem", np.array(x.value[index]), (x,), back)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return record("concat", np.concatenate([t.value for t in tensors], axis=axis), tensors,
                  lambda g: tuple(np.split(g, cuts, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    n = len(tensors)

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return record("stack", np.stack([t.value for t in tensors], axis=axis), tensors, back)


def masked_softmax(logits: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax over the last axis restricted to entries where ``mask`` is True.

    Disallowed entries come out exactly 0. A row with no allowed entry is
    an error rather than a silent NaN.
    """
    v = logits.value
    if mask is None:
        mask = np.ones(v.shape, dtype=bool)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), v.shape)
        if not mask.any(axis=-1).all():
            raise DegenerateMaskError("masked_softmax: a row has no allowed entry")
    z = np.where(mask, v, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return record("masked_softmax", s, (logits,), back)


def softmax(x: Tensor) -> Tensor:
    return masked_softmax(x, None)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table``; output shape is ``ids.shape + (d,)``."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise TypeError(f"embedding ids must be integers, got {ids.dtype}")
    rows = table.shape[0]
    bad = ids[(ids < 0) | (ids >= rows)]
    if bad.size:
        raise IndexError(f"embedding id {int(bad.flat[0])} out of range for table with {rows} rows")
    shape = table.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, ids, g)
        return (full,)

    return record("embedding_lookup", table.value[ids], (table,), back)
