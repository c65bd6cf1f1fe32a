"""Hot numeric kernels: raycasting and single-scan depthwise convolution.

Each kernel has a pure-numpy implementation and a numba ``@njit`` variant
with identical semantics. The numba path is used by default when numba is
importable; set ``SCANDET_NO_NUMBA=1`` to force the numpy path (useful for
debugging and on platforms without a working JIT). ``benchmarks/kernel_bench.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SCANDET_NO_NUMBA", "") not in ("", "0")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # no-op decorator
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def use_numba() -> bool:
    return HAVE_NUMBA


# ---------------------------------------------------------------------------
# Raycasting: nearest hit per beam against wall segments and circles.
# Rays start at (ox, oy); segments are rows (ax, ay, bx, by); circles are
# rows (cx, cy, r). Beams with no hit get +inf.


def _raycast_numpy(ox, oy, angles, segments, circles):
    n = angles.shape[0]
    best = np.full(n, np.inf)
    dx = np.cos(angles)
    dy = np.sin(angles)

    if segments.shape[0]:
        ax = segments[:, 0] - ox
        ay = segments[:, 1] - oy
        ex = segments[:, 2] - segments[:, 0]
        ey = segments[:, 3] - segments[:, 1]
        # solve o + t*d = a + u*e for each (beam, segment)
        denom = dx[:, None] * (-ey)[None, :] + dy[:, None] * ex[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ax[None, :] * (-ey)[None, :] + ay[None, :] * ex[None, :]) / denom
            u = (dx[:, None] * ay[None, :] - dy[:, None] * ax[None, :]) / denom
        hit = (np.abs(denom) > 1e-12) & (t > 1e-9) & (u >= 0.0) & (u <= 1.0)
        t = np.where(hit, t, np.inf)
        best = np.minimum(best, t.min(axis=1))

    if circles.shape[0]:
        cx = circles[:, 0] - ox
        cy = circles[:, 1] - oy
        r2 = circles[:, 2] ** 2
        b = dx[:, None] * cx[None, :] + dy[:, None] * cy[None, :]
        c = (cx**2 + cy**2)[None, :] - r2[None, :]
        disc = b**2 - c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1 = b - sq
        t2 = b + sq
        t = np.where(t1 > 1e-9, t1, np.where(t2 > 1e-9, t2, np.inf))
        t = np.where(disc >= 0.0, t, np.inf)
        best = np.minimum(best, t.min(axis=1))

    return best


@njit(cache=True)
def _raycast_numba(ox, oy, angles, segments, circles):  # pragma: no cover
    n = angles.shape[0]
    best = np.full(n, np.inf)
    for i in range(n):
        dx = np.cos(angles[i])
        dy = np.sin(angles[i])
        hit = np.inf
        for s in range(segments.shape[0]):
            ax = segments[s, 0] - ox
            ay = segments[s, 1] - oy
            ex = segments[s, 2] - segments[s, 0]
            ey = segments[s, 3] - segments[s, 1]
            denom = dx * (-ey) + dy * ex
            if abs(denom) <= 1e-12:
                continue
            t = (ax * (-ey) + ay * ex) / denom
            u = (dx * ay - dy * ax) / denom
            if t > 1e-9 and 0.0 <= u <= 1.0 and t < hit:
                hit = t
        for p in range(circles.shape[0]):
            cx = circles[p, 0] - ox
            cy = circles[p, 1] - oy
            b = dx * cx + dy * cy
            c = cx * cx + cy * cy - circles[p, 2] * circles[p, 2]
            disc = b * b - c
            if disc < 0.0:
                continue
            sq = np.sqrt(disc)
            t = b - sq
            if t <= 1e-9:
                t = b + sq
            if t > 1e-9 and t < hit:
                hit = t
        best[i] = hit
    return best


def raycast(ox, oy, angles, segments, circles):
    """Nearest intersection distance per beam; +inf where nothing is hit."""
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    segments = np.ascontiguousarray(segments, dtype=np.float64).reshape(-1, 4)
    circles = np.ascontiguousarray(circles, dtype=np.float64).reshape(-1, 3)
    if HAVE_NUMBA:
        return _raycast_numba(float(ox), float(oy), angles, segments, circles)
    return _raycast_numpy(float(ox), float(oy), angles, segments, circles)


# ---------------------------------------------------------------------------
# Depthwise 1D convolution for a single scan (C, L), kernel (C, K), odd K,
# zero padding, output length L. Used on the per-scan inference path.


def _depthwise_conv_numpy(x, w):
    c, length = x.shape
    k = w.shape[1]
    half = k // 2
    xp = np.zeros((c, length + 2 * half))
    xp[:, half : half + length] = x
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    return np.einsum("clk,ck->cl", windows, w)


@njit(cache=True)
def _depthwise_conv_numba(x, w):  # pragma: no cover
    c, length = x.shape
    k = w.shape[1]
    half = k // 2
    out = np.zeros((c, length))
    for ch in range(c):
        for i in range(length):
            acc = 0.0
            for j in range(k):
                src = i + j - half
                if 0 <= src < length:
                    acc += x[ch, src] * w[ch, j]
            out[ch, i] = acc
    return out


def depthwise_conv_single(x, w):
    """Same-padded depthwise convolution of one (C, L) scan feature map."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if HAVE_NUMBA:
        return _depthwise_conv_numba(x, w)
    return _depthwise_conv_numpy(x, w)
