"""Training losses, composed from autograd primitives."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor, _as_tensor, _record

BCE_EPS = 1e-7
DICE_SMOOTHING = 1.0


def bce(p: Tensor, t: Tensor) -> Tensor:
    """Binary cross entropy of probabilities p against targets t, mean-reduced.

    p is clamped to [BCE_EPS, 1 - BCE_EPS] so hard 0/1 outputs stay finite.
    """
    p, t = _as_tensor(p), _as_tensor(t)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    pc = T.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    one = Tensor(np.ones_like(t.data))
    loss = -(t * T.log(pc) + (one - t) * T.log(one - pc))
    return loss.mean()


def dice(p: Tensor, t: Tensor, smoothing: float = DICE_SMOOTHING) -> Tensor:
    """Dice loss: 1 minus a smoothed F1 of predicted and target masks."""
    p, t = _as_tensor(p), _as_tensor(t)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    inter = (p * t).sum()
    denom = p.sum() + t.sum() + Tensor(smoothing)
    return Tensor(1.0) - (2.0 * inter + Tensor(smoothing)) / denom


def smooth_l1(y: Tensor, t: Tensor) -> Tensor:
    """Smooth L1 (Huber at delta=1) of residuals y - t, mean-reduced."""
    y, t = _as_tensor(y), _as_tensor(t)
    if y.shape != t.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {t.shape}")
    u = y - t
    ud = u.data
    small = np.abs(ud) < 1.0
    out = Tensor(np.where(small, 0.5 * ud**2, np.abs(ud) - 0.5))

    def bw(g):
        u._accumulate(np.asarray(g) * np.where(small, ud, np.sign(ud)))

    return _record(out, (u,), bw).mean()
