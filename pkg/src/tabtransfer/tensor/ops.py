"""Differentiable operations over :class:`~tabtransfer.tensor.autograd.Tensor`.

Every op computes its forward value eagerly with numpy and, when recording,
stores a closure producing input gradients from the output gradient.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .autograd import ShapeError, Tensor, as_tensor, gelu_grad, gelu_value, make_output, unbroadcast

NORM_EPS = 1e-5


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape, detail="not broadcastable") from None


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return make_output("add", a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape
    return make_output("sub", a.data - b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data

    def fn(g):
        return unbroadcast(g * bd, ad.shape), unbroadcast(g * ad, bd.shape)

    return make_output("mul", ad * bd, (a, b), fn)


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape("div", a, b)
    ad, bd = a.data, b.data
    out = ad / bd

    def fn(g):
        return unbroadcast(g / bd, ad.shape), unbroadcast(-g * out / bd, bd.shape)

    return make_output("div", out, (a, b), fn)


def neg(a: Tensor) -> Tensor:
    return make_output("neg", -a.data, (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    ad, bd = a.data, b.data
    # a stacked input against a plain matrix is one 2-D product
    flat = ad.ndim > 2 and bd.ndim == 2
    try:
        out = (ad.reshape(-1, ad.shape[-1]) @ bd).reshape(ad.shape[:-1] + bd.shape[1:]) if flat else np.matmul(ad, bd)
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, detail="batch dims not broadcastable") from None

    def fn(g):
        ga = np.matmul(g, np.swapaxes(bd, -1, -2)) if a.requires_grad else None
        if not b.requires_grad:
            gb = None
        elif flat:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        return (
            None if ga is None else unbroadcast(ga, ad.shape),
            None if gb is None else unbroadcast(gb, bd.shape),
        )

    return make_output("matmul", out, (a, b), fn)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_output("relu", np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,), pre=x.data)


def gelu(x: Tensor) -> Tensor:
    xd = x.data
    return make_output("gelu", gelu_value(xd).astype(x.dtype), (x,), lambda g: (g * gelu_grad(xd),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_output("exp", out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    xd = x.data
    return make_output("log", np.log(xd), (x,), lambda g: (g / xd,))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return make_output("sigmoid", out, (x,), lambda g: (g * out * (1 - out),))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_output("softmax", out, (x,), fn)


def layer_norm(x: Tensor, weight: Optional[Tensor] = None, bias: Optional[Tensor] = None, eps: float = NORM_EPS) -> Tensor:
    """Normalize over the last axis, then apply the optional affine map."""
    xd = x.data
    d = xd.shape[-1]
    for p in (weight, bias):
        if p is not None and p.shape != (d,):
            raise ShapeError("layer_norm", x.shape, p.shape)
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat
    if weight is not None:
        out = out * weight.data
    if bias is not None:
        out = out + bias.data
    lead = tuple(range(xd.ndim - 1))

    def fn(g):
        gx = g * weight.data if weight is not None else g
        gx_in = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        gw = (g * xhat).sum(axis=lead) if weight is not None else None
        gb = g.sum(axis=lead) if bias is not None else None
        return gx_in, gw, gb

    return make_output("layer_norm", out.astype(x.dtype, copy=False), (x, weight, bias), fn)


def batch_norm(
    x: Tensor,
    weight: Tensor,
    bias: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = NORM_EPS,
) -> Tensor:
    """Batch normalization over axis 0 of a ``(N, D)`` input.

    In training mode the running statistics are updated in place (unbiased
    variance); in eval mode they are used for normalization.
    """
    xd = x.data
    if xd.ndim != 2 or weight.shape != (xd.shape[1],):
        raise ShapeError("batch_norm", x.shape, weight.shape)
    n = xd.shape[0]
    if training:
        mu = xd.mean(axis=0)
        xc = xd - mu
        var = (xc * xc).mean(axis=0)
        running_mean *= 1 - momentum
        running_mean += momentum * mu
        unbiased = var * (n / (n - 1)) if n > 1 else var
        running_var *= 1 - momentum
        running_var += momentum * unbiased
    else:
        xc = xd - running_mean
        var = running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * weight.data + bias.data
    wd = weight.data

    def fn(g):
        gx = g * wd
        if training:
            gx_in = inv * (gx - gx.mean(axis=0) - xhat * (gx * xhat).mean(axis=0))
        else:
            gx_in = gx * inv
        return gx_in, (g * xhat).sum(axis=0), g.sum(axis=0)

    return make_output("batch_norm", out.astype(x.dtype, copy=False), (x, weight, bias), fn)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``p == 0``."""
    if not training or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout: an explicit RNG stream is required in training mode")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must lie in [0, 1), got {p}")
    scale = 1.0 / (1.0 - p)
    mask = (rng.random(x.shape) >= p).astype(x.dtype) * scale
    return make_output("dropout", x.data * mask, (x,), lambda g: (g * mask,), mask=mask)


def embedding(table: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index)
    if index.dtype.kind not in "iu":
        raise ShapeError("embedding", table.shape, index.shape, detail="index must be integer")
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise IndexError(f"embedding: index out of range for table of {table.shape[0]} rows")
    shape = table.shape

    def fn(g):
        gt = np.zeros(shape, dtype=g.dtype)
        np.add.at(gt, index.reshape(-1), g.reshape(-1, shape[-1]))
        return (gt,)

    return make_output("embedding", table.data[index], (table,), fn)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    ref = ts[0]
    ax = axis % ref.ndim
    for t in ts[1:]:
        if t.ndim != ref.ndim or any(t.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != ax):
            raise ShapeError("concat", ref.shape, t.shape)
    sizes = [t.shape[ax] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def fn(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(ts)))

    return make_output("concat", np.concatenate([t.data for t in ts], axis=ax), tuple(ts), fn)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    shape = x.shape

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_output("sum", np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), fn)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = x.shape
    if axis is None:
        count = x.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([shape[a] for a in axes]))

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape).copy(),)

    return make_output("mean", np.asarray(x.data.mean(axis=axis, keepdims=keepdims)), (x,), fn)


def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", src, tuple(shape)) from None
    return make_output("reshape", out, (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(a % x.ndim for a in axes)
    inverse = tuple(np.argsort(axes))
    return make_output("transpose", np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    axes = list(range(x.ndim))
    axes[a], axes[b] = axes[b], axes[a]
    return transpose(x, axes)


def _is_basic(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in parts)


def getitem(x: Tensor, index) -> Tensor:
    shape = x.shape
    # basic indexing selects each entry at most once, so plain assignment suffices
    basic = _is_basic(index)

    def fn(g):
        gx = np.zeros(shape, dtype=g.dtype)
        if basic:
            gx[index] = g
        else:
            np.add.at(gx, index, g)
        return (gx,)

    return make_output("getitem", x.data[index], (x,), fn)


def take_rows(x: Tensor, rows: np.ndarray) -> Tensor:
    return getitem(x, np.asarray(rows, dtype=np.int64))


def l2_normalize(x: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    norm = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    norm = np.maximum(norm, eps)
    out = x.data / norm

    def fn(g):
        return ((g - out * (g * out).sum(axis=axis, keepdims=True)) / norm,)

    return make_output("l2_normalize", out, (x,), fn)


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy over all entries, computed stably from logits."""
    y = np.asarray(targets, dtype=logits.dtype)
    if y.shape != logits.shape:
        raise ShapeError("bce_with_logits", logits.shape, y.shape)
    z = logits.data
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size

    def fn(g):
        return (g * (_sigmoid(z) - y) / n,)

    return make_output("bce_with_logits", np.asarray(loss.mean(), dtype=z.dtype), (logits,), fn)


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean categorical cross-entropy; ``targets`` are integer class ids."""
    t = np.asarray(targets)
    z = logits.data
    if z.ndim != 2 or t.shape != (z.shape[0],):
        raise ShapeError("softmax_cross_entropy", logits.shape, t.shape)
    zs = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zs).sum(axis=1, keepdims=True))
    logp = zs - lse
    n = z.shape[0]
    rows = np.arange(n)
    loss = -logp[rows, t].mean()

    def fn(g):
        p = np.exp(logp)
        p[rows, t] -= 1.0
        return (g * p / n,)

    return make_output("softmax_cross_entropy", np.asarray(loss, dtype=z.dtype), (logits,), fn)


def mse(pred: Tensor, target) -> Tensor:
    t = np.asarray(target, dtype=pred.dtype)
    if t.shape != pred.shape:
        raise ShapeError("mse", pred.shape, t.shape)
    diff = pred.data - t
    n = diff.size

    def fn(g):
        return (g * 2.0 * diff / n,)

    return make_output("mse", np.asarray((diff * diff).mean(), dtype=pred.dtype), (pred,), fn)
