"""Network building blocks on top of the autograd tensor.

All layers operate on batched 1D feature maps of shape (B, C, L).
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Base class: parameter discovery, train/eval mode, state dicts."""

    training = True

    def modules(self):
        for attr in vars(self).values():
            if isinstance(attr, Module):
                yield attr
            elif isinstance(attr, (list, tuple)):
                for item in attr:
                    if isinstance(item, Module):
                        yield item

    def named_parameters(self, prefix=""):
        for name, attr in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(attr, Tensor) and attr.requires_grad:
                yield path, attr
            elif isinstance(attr, Module):
                yield from attr.named_parameters(f"{path}.")
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def train(self):
        self.training = True
        for m in self.modules():
            m.train()
        return self

    def eval(self):
        self.training = False
        for m in self.modules():
            m.eval()
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update(self._buffers())
        return state

    def load_state_dict(self, state: dict) -> None:
        buffers = dict(self._buffer_refs())
        for name, p in self.named_parameters():
            p.data = np.array(state[name], dtype=np.float64)
        for name, (owner, attr) in buffers.items():
            if name in state:
                setattr(owner, attr, np.array(state[name], dtype=np.float64))

    def _buffers(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, (owner, attr) in self._buffer_refs().items()
                for arr in [getattr(owner, attr)]}

    def _buffer_refs(self, prefix=""):
        out = {}
        for name, attr in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(attr, Module):
                out.update(attr._buffer_refs(f"{path}."))
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        out.update(item._buffer_refs(f"{path}.{i}."))
        if isinstance(self, BatchNorm1d):
            out[f"{prefix}running_mean"] = (self, "running_mean")
            out[f"{prefix}running_var"] = (self, "running_var")
        return out

    def __call__(self, x):
        return self.forward(x)


def _param(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    scale = np.sqrt(2.0 / fan_in)
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)


class SeparableConv1d(Module):
    """Depthwise 1D conv followed by a pointwise channel-mixing conv.

    With ``global_agg=True`` the global length-wise max of the depthwise
    output is concatenated to every position before the pointwise stage.
    """

    def __init__(self, in_ch, out_ch, kernel, rng, global_agg=False):
        if kernel % 2 == 0:
            raise ValueError("kernel size must be odd")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.global_agg = global_agg
        self.depthwise = _param(rng, (in_ch, kernel), fan_in=kernel)
        pw_in = 2 * in_ch if global_agg else in_ch
        self.pointwise = _param(rng, (out_ch, pw_in), fan_in=pw_in)
        self.bias = Tensor(np.zeros(out_ch), requires_grad=True)

    def forward(self, x):
        y = T.depthwise_conv1d(x, self.depthwise)
        if self.global_agg:
            y = T.global_max_broadcast(y)
        return T.pointwise_conv1d(y, self.pointwise, self.bias)


class PointwiseConv1d(Module):
    def __init__(self, in_ch, out_ch, rng):
        self.weight = _param(rng, (out_ch, in_ch), fan_in=in_ch)
        self.bias = Tensor(np.zeros(out_ch), requires_grad=True)

    def forward(self, x):
        return T.pointwise_conv1d(x, self.weight, self.bias)


class BatchNorm1d(Module):
    def __init__(self, channels, eps=1e-5, momentum=0.1):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones((1, channels, 1)), requires_grad=True)
        self.beta = Tensor(np.zeros((1, channels, 1)), requires_grad=True)
        self.running_mean = np.zeros((1, channels, 1))
        self.running_var = np.ones((1, channels, 1))

    def forward(self, x):
        if self.training:
            mu = x.mean(axis=(0, 2), keepdims=True)
            xc = x - mu
            var = (xc * xc).mean(axis=(0, 2), keepdims=True)
            self.running_mean = (
                (1 - self.momentum) * self.running_mean + self.momentum * mu.data
            )
            self.running_var = (
                (1 - self.momentum) * self.running_var + self.momentum * var.data
            )
        else:
            mu = Tensor(self.running_mean)
            xc = x - mu
            var = Tensor(self.running_var)
        return self.gamma * (xc / T.sqrt(var + Tensor(self.eps))) + self.beta


class ReLU(Module):
    def forward(self, x):
        return T.relu(x)


class Dropout(Module):
    def __init__(self, rate, rng):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng

    def forward(self, x):
        if not self.training or self.rate == 0.0:
            return x
        return T.dropout(x, self.rate, self.rng)


class MaxPool1d(Module):
    def __init__(self, factor):
        if factor < 2:
            raise ValueError("pool factor must be >= 2")
        self.factor = factor

    def forward(self, x):
        return T.maxpool1d(x, self.factor)


class UpsampleNearest(Module):
    def __init__(self, factor):
        if factor < 2:
            raise ValueError("upsample factor must be >= 2")
        self.factor = factor

    def forward(self, x):
        return T.upsample_nearest(x, self.factor)


class Sequential(Module):
    def __init__(self, *layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x
