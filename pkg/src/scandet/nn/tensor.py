"""Minimal reverse-mode autograd over numpy arrays.

Tensors wrap float64 ndarrays; a recorded op stores its parents and a
closure that accumulates gradients into them. Inference code should run
inside ``no_grad()`` which disables recording (and enables fast single-scan
kernels in the conv ops).
"""

from __future__ import annotations

import contextlib

import numpy as np

from .. import _kernels

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._backward is not None:
                t._backward(t.grad)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __rsub__(self, other):
        return add(-self, _as_tensor(other))

    def __mul__(self, other):
        if np.isscalar(other):
            return mul_scalar(self, other)
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return mul_scalar(self, 1.0 / other)
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape)

    def __getitem__(self, idx):
        return getitem(self, idx)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out: Tensor, parents, backward):
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# --- elementwise ---------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _record(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _record(out, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data**2), b.shape))

    return _record(out, (a, b), bw)


def mul_scalar(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s)

    def bw(g):
        a._accumulate(g * s)

    return _record(out, (a,), bw)


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    mask = a.data > 0

    def bw(g):
        a._accumulate(g * mask)

    return _record(out, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(s)

    def bw(g):
        a._accumulate(g * s * (1.0 - s))

    return _record(out, (a,), bw)


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data))

    def bw(g):
        a._accumulate(g / a.data)

    return _record(out, (a,), bw)


def sqrt(a: Tensor) -> Tensor:
    root = np.sqrt(a.data)
    out = Tensor(root)

    def bw(g):
        a._accumulate(g * 0.5 / root)

    return _record(out, (a,), bw)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out = Tensor(np.clip(a.data, lo, hi))
    mask = (a.data > lo) & (a.data < hi)

    def bw(g):
        a._accumulate(g * mask)

    return _record(out, (a,), bw)


# --- reductions / shape ---------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))

    return _record(out, (a,), bw)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[i] for i in axes]))
    return mul_scalar(tsum(a, axis, keepdims), 1.0 / count)


def tmax(a: Tensor, axis: int, keepdims=False) -> Tensor:
    """Max along one axis; the gradient flows to the first argmax."""
    out_data = a.data.max(axis=axis, keepdims=keepdims)
    arg = a.data.argmax(axis=axis)
    out = Tensor(out_data)

    def bw(g):
        g = np.asarray(g)
        if not keepdims:
            g = np.expand_dims(g, axis)
        gx = np.zeros_like(a.data)
        np.put_along_axis(gx, np.expand_dims(arg, axis), g, axis=axis)
        a._accumulate(gx)

    return _record(out, (a,), bw)


def getitem(a: Tensor, idx) -> Tensor:
    out = Tensor(a.data[idx])

    def bw(g):
        gx = np.zeros_like(a.data)
        gx[idx] = g
        a._accumulate(gx)

    return _record(out, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))

    def bw(g):
        a._accumulate(np.asarray(g).reshape(a.shape))

    return _record(out, (a,), bw)


def broadcast_to(a: Tensor, shape) -> Tensor:
    out = Tensor(np.broadcast_to(a.data, shape).copy())

    def bw(g):
        a._accumulate(_unbroadcast(g, a.shape))

    return _record(out, (a,), bw)


def concat(tensors, axis: int) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(np.asarray(g)[tuple(idx)])

    return _record(out, tensors, bw)


# --- 1D network ops (batched feature maps of shape (B, C, L)) -------------


def _dw_windows(x, k):
    half = k // 2
    b, c, length = x.shape
    xp = np.zeros((b, c, length + 2 * half))
    xp[:, :, half : half + length] = x
    return np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)


def depthwise_conv1d(x: Tensor, w: Tensor) -> Tensor:
    """Per-channel same-padded convolution: x (B, C, L), w (C, K), K odd."""
    b, c, length = x.shape
    cw, k = w.shape
    if cw != c:
        raise ValueError(f"depthwise channels mismatch: {c} vs {cw}")
    if k % 2 == 0:
        raise ValueError("kernel size must be odd")
    if not _GRAD_ENABLED and b == 1:
        return Tensor(_kernels.depthwise_conv_single(x.data[0], w.data)[None])
    win = _dw_windows(x.data, k)
    out = Tensor(np.einsum("bclk,ck->bcl", win, w.data, optimize=True))

    def bw(g):
        g = np.asarray(g)
        if w.requires_grad:
            w._accumulate(np.einsum("bclk,bcl->ck", win, g, optimize=True))
        if x.requires_grad:
            gwin = _dw_windows(g, k)
            x._accumulate(
                np.einsum("bclk,ck->bcl", gwin, w.data[:, ::-1], optimize=True)
            )

    return _record(out, (x, w), bw)


def pointwise_conv1d(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """1x1 convolution mixing channels: x (B, C, L), w (O, C), bias (O,)."""
    out_data = np.einsum("oc,bcl->bol", w.data, x.data, optimize=True)
    if bias is not None:
        out_data = out_data + bias.data[None, :, None]
    out = Tensor(out_data)

    def bw(g):
        g = np.asarray(g)
        if w.requires_grad:
            w._accumulate(np.einsum("bol,bcl->oc", g, x.data, optimize=True))
        if x.requires_grad:
            x._accumulate(np.einsum("oc,bol->bcl", w.data, g, optimize=True))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))

    parents = (x, w) if bias is None else (x, w, bias)
    return _record(out, parents, bw)


def maxpool1d(x: Tensor, factor: int) -> Tensor:
    """Non-overlapping max pooling along the length axis."""
    b, c, length = x.shape
    if length % factor:
        raise ValueError(f"length {length} not divisible by pool factor {factor}")
    blocks = x.data.reshape(b, c, length // factor, factor)
    arg = blocks.argmax(axis=3)
    out = Tensor(blocks.max(axis=3))

    def bw(g):
        gx = np.zeros_like(blocks)
        np.put_along_axis(gx, arg[..., None], np.asarray(g)[..., None], axis=3)
        x._accumulate(gx.reshape(b, c, length))

    return _record(out, (x,), bw)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    b, c, length = x.shape
    out = Tensor(np.repeat(x.data, factor, axis=2))

    def bw(g):
        x._accumulate(np.asarray(g).reshape(b, c, length, factor).sum(axis=3))

    return _record(out, (x,), bw)


def global_max_broadcast(x: Tensor) -> Tensor:
    """Concatenate the global length-wise max of each channel to every
    position, doubling the channel count."""
    m = tmax(x, axis=2, keepdims=True)
    return concat([x, broadcast_to(m, x.shape)], axis=1)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; call only in training mode."""
    if rate <= 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(mask))
