"""Laser feature extractor backbone, segmentation head, and the classical
peak-based post-processor that turns per-point probabilities into detections.

The backbone is a stack of three residual blocks of depthwise separable
convolutions (kernels 9, 7, 5) producing feature maps at full, half and
sixth resolution. The segmentation head is a U-Net style decoder with skip
connections and a sigmoid output per point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, benchmark_views, scan_with_annotations
from .geometry import LaserScan, PersonCircle, detection_circle, polar_to_cartesian
from .nn import losses, no_grad
from .nn.layers import (
    BatchNorm1d,
    Dropout,
    MaxPool1d,
    Module,
    PointwiseConv1d,
    ReLU,
    SeparableConv1d,
    Sequential,
    UpsampleNearest,
)
from .nn.tensor import Tensor, concat, sigmoid, upsample_nearest
from .nn.training import TrainConfig, History, train_loop

KERNEL_SIZES = (9, 7, 5)
NOMINAL_DETECTION_RADIUS = 0.3


@dataclass(frozen=True)
class LfeConfig:
    block_channels: tuple[int, int, int] = (32, 64, 96)
    dropout: float = 0.1
    aggregator_blocks: tuple[int, ...] = (2, 3)  # 1-based block indices
    seed: int = 0

    def as_dict(self):
        return {
            "block_channels": list(self.block_channels),
            "dropout": self.dropout,
            "aggregator_blocks": list(self.aggregator_blocks),
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d):
        return LfeConfig(
            block_channels=tuple(d["block_channels"]),
            dropout=float(d["dropout"]),
            aggregator_blocks=tuple(d["aggregator_blocks"]),
            seed=int(d["seed"]),
        )


class LfeBlock(Module):
    """Three separable convs with ReLU/batchnorm/dropout each, plus a
    residual path from the block input to the last conv's output."""

    def __init__(self, in_ch, out_ch, dropout, rng, global_agg=False):
        stages = []
        ch = in_ch
        for i, k in enumerate(KERNEL_SIZES):
            stages.append(
                SeparableConv1d(ch, out_ch, k, rng, global_agg=global_agg and i == 0)
            )
            stages.append(ReLU())
            stages.append(BatchNorm1d(out_ch))
            stages.append(Dropout(dropout, rng))
            ch = out_ch
        self.stack = Sequential(*stages)
        self.project = None if in_ch == out_ch else PointwiseConv1d(in_ch, out_ch, rng)

    def forward(self, x):
        res = x if self.project is None else self.project(x)
        return self.stack(x) + res


class LfeBackbone(Module):
    """Produces feature maps at full, /2 and /6 resolution."""

    def __init__(self, config: LfeConfig, rng):
        c1, c2, c3 = config.block_channels
        agg = config.aggregator_blocks
        self.block1 = LfeBlock(1, c1, config.dropout, rng, global_agg=1 in agg)
        self.pool2 = MaxPool1d(2)
        self.block2 = LfeBlock(c1, c2, config.dropout, rng, global_agg=2 in agg)
        self.pool3 = MaxPool1d(3)
        self.block3 = LfeBlock(c2, c3, config.dropout, rng, global_agg=3 in agg)

    def forward(self, x):
        if x.shape[2] % 6:
            raise ValueError(f"scan length {x.shape[2]} not divisible by 6")
        f1 = self.block1(x)
        f2 = self.block2(self.pool2(f1))
        f3 = self.block3(self.pool3(f2))
        return f1, f2, f3


class SegmentationModel(Module):
    """LFE backbone plus an inverse-LFE decoder with skip connections."""

    def __init__(self, config: LfeConfig = LfeConfig()):
        self.config = config
        rng = np.random.default_rng(config.seed)
        c1, c2, c3 = config.block_channels
        self.backbone = LfeBackbone(config, rng)
        self.up3 = UpsampleNearest(3)
        self.dec2 = LfeBlock(c3 + c2, c2, config.dropout, rng)
        self.up2 = UpsampleNearest(2)
        self.dec1 = LfeBlock(c2 + c1, c1, config.dropout, rng)
        self.head = PointwiseConv1d(c1, 1, rng)

    def forward(self, x):
        f1, f2, f3 = self.backbone(x)
        d2 = self.dec2(concat([self.up3(f3), f2], axis=1))
        d1 = self.dec1(concat([self.up2(d2), f1], axis=1))
        return sigmoid(self.head(d1))


def preprocess_scan(scan: LaserScan) -> np.ndarray:
    """Model input: ranges scaled to [0, 1] by range_max, invalid beams 1.0."""
    r = np.asarray(scan.ranges, dtype=np.float64)
    valid = scan.valid_mask()
    return np.where(valid, np.clip(r / scan.meta.range_max, 0.0, 1.0), 1.0)[None, :]


def point_labels(scan: LaserScan, circles: list[PersonCircle]) -> np.ndarray:
    """Per-point class: 1 iff the point lies inside any ground-truth circle."""
    points, valid = polar_to_cartesian(scan)
    inside = np.zeros(scan.meta.num_points, dtype=bool)
    for c in circles:
        d2 = (points[:, 0] - c.x) ** 2 + (points[:, 1] - c.y) ** 2
        inside |= d2 <= c.radius**2
    return (inside & valid).astype(np.float64)


def segmentation_forward(scan: LaserScan, model: SegmentationModel) -> np.ndarray:
    """Per-point person probability for one scan (inference mode)."""
    model.eval()
    with no_grad():
        probs = model(Tensor(preprocess_scan(scan)[None]))
    return probs.data[0, 0]


def segmentation_loss(probs: Tensor, targets: Tensor) -> Tensor:
    return (losses.bce(probs, targets) + losses.dice(probs, targets)) * 0.5


def make_seg_items(ds: Dataset, indices) -> list[tuple[np.ndarray, np.ndarray]]:
    items = []
    for i in indices:
        scan, circles = scan_with_annotations(ds, int(i))
        items.append((preprocess_scan(scan), point_labels(scan, circles)))
    return items


def train_segmentation(
    ds: Dataset,
    config: LfeConfig = LfeConfig(),
    train_config: TrainConfig | None = None,
    log=None,
) -> tuple[SegmentationModel, History]:
    """Train the segmentation network on the dataset's benchmark views with
    the mixed BCE+Dice loss."""
    if train_config is None:
        train_config = TrainConfig(
            epochs=100, batch_size=32, lr=1e-3, weight_decay=4e-3,
            patience=20, min_delta=1e-3, seed=config.seed,
        )
    train_idx, val_idx = benchmark_views(ds)
    if not len(train_idx):
        raise ValueError("empty training view")
    train_items = make_seg_items(ds, train_idx)
    val_items = make_seg_items(ds, val_idx)

    model = SegmentationModel(config)

    def loss_fn(m, batch):
        x = Tensor(np.stack([b[0] for b in batch]))
        t = Tensor(np.stack([b[1] for b in batch])[:, None, :])
        return segmentation_loss(m(x), t)

    history = train_loop(model, loss_fn, train_items, val_items, train_config, log=log)
    return model, history


# ---------------------------------------------------------------------------
# LFE-Peaks post-processing


@dataclass(frozen=True)
class PeakParams:
    height_threshold: float = 0.5
    min_region_points: int = 2
    outlier_mad_k: float = 3.0
    leg_merge_distance: float = 0.6

    def __post_init__(self):
        if not 0.0 < self.height_threshold < 1.0:
            raise ValueError("height_threshold must be in (0, 1)")


@dataclass(frozen=True)
class Region:
    start: int  # inclusive
    end: int  # inclusive
    peak_height: float
    width: int


def find_regions(probs: np.ndarray, params: PeakParams) -> list[Region]:
    """Maximal runs of consecutive indices with probs >= height_threshold,
    discarding runs shorter than min_region_points."""
    probs = np.asarray(probs)
    above = probs >= params.height_threshold
    regions = []
    i = 0
    n = len(above)
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        width = j - i + 1
        if width >= params.min_region_points:
            regions.append(
                Region(start=i, end=j, peak_height=float(probs[i : j + 1].max()),
                       width=width)
            )
        i = j + 1
    return regions


def _medoid_index(points: np.ndarray) -> int:
    diffs = points[:, None, :] - points[None, :, :]
    total = np.hypot(diffs[..., 0], diffs[..., 1]).sum(axis=1)
    return int(np.argmin(total))


@dataclass
class _Centroid:
    x: float
    y: float
    prob_sum: float
    probs: list[float]


def regions_to_detections(
    regions: list[Region],
    scan: LaserScan,
    probs: np.ndarray,
    params: PeakParams,
) -> list[PersonCircle]:
    """Centroid per region (robust to outliers), then merge nearby centroids
    into person detections scored by the mean member probability."""
    points, valid = polar_to_cartesian(scan)
    centroids: list[_Centroid] = []
    for reg in regions:
        idx = np.arange(reg.start, reg.end + 1)
        idx = idx[valid[idx]]
        if idx.size == 0:
            continue
        pts = points[idx]
        med = _medoid_index(pts)
        dists = np.hypot(pts[:, 0] - pts[med, 0], pts[:, 1] - pts[med, 1])
        median = np.median(dists)
        mad = np.median(np.abs(dists - median))
        keep = dists <= median + params.outlier_mad_k * mad
        if not keep.any():
            keep[med] = True
        pts = pts[keep]
        member_probs = probs[idx[keep]]
        centroids.append(
            _Centroid(
                x=float(pts[:, 0].mean()),
                y=float(pts[:, 1].mean()),
                prob_sum=float(member_probs.sum()),
                probs=list(member_probs),
            )
        )

    # merge closest pairs until all pairwise distances >= leg_merge_distance
    while len(centroids) > 1:
        best = None
        for i in range(len(centroids)):
            for j in range(i + 1, len(centroids)):
                d = math.hypot(
                    centroids[i].x - centroids[j].x, centroids[i].y - centroids[j].y
                )
                if d < params.leg_merge_distance and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        a, b = centroids[i], centroids[j]
        w = a.prob_sum + b.prob_sum
        merged = _Centroid(
            x=(a.x * a.prob_sum + b.x * b.prob_sum) / w,
            y=(a.y * a.prob_sum + b.y * b.prob_sum) / w,
            prob_sum=w,
            probs=a.probs + b.probs,
        )
        centroids = [c for k, c in enumerate(centroids) if k not in (i, j)]
        centroids.append(merged)

    return [
        detection_circle(c.x, c.y, NOMINAL_DETECTION_RADIUS, float(np.mean(c.probs)))
        for c in centroids
    ]


def detect_peaks(
    scan: LaserScan, model: SegmentationModel, params: PeakParams = PeakParams()
) -> list[PersonCircle]:
    """Full LFE-Peaks detector: segmentation + peaks post-processing."""
    probs = segmentation_forward(scan, model)
    regions = find_regions(probs, params)
    return regions_to_detections(regions, scan, probs, params)
