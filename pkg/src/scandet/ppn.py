"""People proposal network: polar anchor grid, target assignment, detection
head on top of the LFE backbone, decoding and center-distance NMS.

Anchors live on a ring-sector lattice: one sector per /6 feature position,
M evenly spaced range levels per sector. Offsets are regressed as a distance
offset and an arc offset (tangential displacement at the anchor radius),
both normalized by the radial anchor spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, benchmark_views, scan_with_annotations
from .geometry import (
    LaserScan,
    PersonCircle,
    SensorMeta,
    center_distance,
    detection_circle,
    wrap_angle,
)
from .lfe import LfeBackbone, LfeConfig, SegmentationModel, preprocess_scan
from .nn import losses, no_grad
from .nn.layers import Module, PointwiseConv1d, SeparableConv1d
from .nn.tensor import Tensor, concat, maxpool1d, sigmoid
from .nn.training import History, TrainConfig, train_loop

NOMINAL_DETECTION_RADIUS = 0.3
DEFAULT_TAU = 0.5
DEFAULT_D_NMS = 0.5
SECTOR_DOWNSAMPLE = 6


@dataclass(frozen=True)
class AnchorGrid:
    """Polar lattice of candidate person positions."""

    meta: SensorMeta
    anchors_per_sector: int
    near: float
    far: float

    def __post_init__(self):
        if self.meta.num_points % SECTOR_DOWNSAMPLE:
            raise ValueError("num_points must be divisible by 6")
        if not 0 < self.near < self.far:
            raise ValueError("need 0 < near < far")
        if self.anchors_per_sector < 2:
            raise ValueError("need at least 2 anchors per sector")

    @property
    def sectors(self) -> int:
        return self.meta.num_points // SECTOR_DOWNSAMPLE

    @property
    def spacing(self) -> float:
        """Radial anchor spacing; also the offset normalization scale."""
        return (self.far - self.near) / self.anchors_per_sector

    @property
    def sector_width(self) -> float:
        return SECTOR_DOWNSAMPLE * self.meta.angle_increment

    @property
    def sector_angles(self) -> np.ndarray:
        return self.meta.angle_min + (np.arange(self.sectors) + 0.5) * self.sector_width

    @property
    def radii(self) -> np.ndarray:
        return self.near + (np.arange(self.anchors_per_sector) + 0.5) * self.spacing

    def anchor_xy(self) -> np.ndarray:
        """(sectors, M, 2) Cartesian anchor centers."""
        theta = self.sector_angles[:, None]
        r = self.radii[None, :]
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=2)


def build_anchor_grid(
    meta: SensorMeta, anchors_per_sector: int = 16, near: float = 0.3, far: float = 10.0
) -> AnchorGrid:
    return AnchorGrid(meta=meta, anchors_per_sector=anchors_per_sector,
                      near=near, far=far)


@dataclass(frozen=True)
class AnchorTargets:
    """Per-anchor class and normalized offsets, shape (sectors, M)."""

    s: np.ndarray
    dd: np.ndarray
    dl: np.ndarray

    @property
    def n_pos(self) -> int:
        return int(self.s.sum())

    @property
    def n_neg(self) -> int:
        return int(self.s.size - self.s.sum())


def assign_targets(
    grid: AnchorGrid, gt: list[PersonCircle], tau: float = DEFAULT_TAU
) -> AnchorTargets:
    """Anchors within tau of a ground-truth center are positive and regress
    the offsets toward their nearest ground truth."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    shape = (grid.sectors, grid.anchors_per_sector)
    if not gt:
        z = np.zeros(shape)
        return AnchorTargets(s=z.copy(), dd=z.copy(), dl=z.copy())

    xy = grid.anchor_xy()
    gt_xy = np.array([[c.x, c.y] for c in gt])
    d = np.hypot(
        xy[:, :, 0][..., None] - gt_xy[:, 0], xy[:, :, 1][..., None] - gt_xy[:, 1]
    )  # (S, M, G)
    nearest = d.argmin(axis=2)
    dmin = np.take_along_axis(d, nearest[..., None], axis=2)[..., 0]
    s = (dmin <= tau).astype(np.float64)

    gt_r = np.array([c.distance for c in gt])[nearest]
    gt_theta = np.array([c.angle for c in gt])[nearest]
    r_anchor = np.broadcast_to(grid.radii[None, :], shape)
    theta_anchor = np.broadcast_to(grid.sector_angles[:, None], shape)
    dd = (gt_r - r_anchor) / grid.spacing
    dl = wrap_angle(gt_theta - theta_anchor) * r_anchor / grid.spacing
    return AnchorTargets(s=s, dd=np.where(s > 0, dd, 0.0), dl=np.where(s > 0, dl, 0.0))


class PpnModel(Module):
    """LFE backbone plus the proposal head.

    The three backbone maps are maxpooled to /6 resolution and concatenated;
    a k=3 separable conv and a final pointwise conv emit 3 channels per
    anchor: objectness logit, distance offset and arc offset.
    """

    def __init__(self, config: LfeConfig = LfeConfig(), anchors_per_sector: int = 16,
                 near: float = 0.3, far: float = 10.0):
        self.config = config
        self.anchors_per_sector = anchors_per_sector
        self.near = near
        self.far = far
        rng = np.random.default_rng(config.seed + 1)
        c1, c2, c3 = config.block_channels
        total = c1 + c2 + c3
        self.backbone = LfeBackbone(config, rng)
        self.fuse = SeparableConv1d(total, total, 3, rng)
        self.head = PointwiseConv1d(total, 3 * anchors_per_sector, rng)

    def grid_for(self, meta: SensorMeta) -> AnchorGrid:
        return build_anchor_grid(meta, self.anchors_per_sector, self.near, self.far)

    def forward(self, x):
        """Returns (B, M, 3, sectors): per anchor logit, dd, dl."""
        f1, f2, f3 = self.backbone(x)
        fused = concat([maxpool1d(f1, 6), maxpool1d(f2, 3), f3], axis=1)
        out = self.head(self.fuse(fused))
        b, _, sectors = out.shape
        return out.reshape(b, self.anchors_per_sector, 3, sectors)

    def predict(self, scan: LaserScan) -> np.ndarray:
        """Inference on one scan: raw head output, shape (sectors, M, 3)."""
        self.eval()
        with no_grad():
            out = self.forward(Tensor(preprocess_scan(scan)[None]))
        return out.data[0].transpose(2, 0, 1)


def ppn_loss(out_sample, targets: AnchorTargets) -> Tensor:
    """Proposal loss for one scan.

    Classification: (bce + dice)/2 over all anchors, with the bce term
    normalized by the total anchor count. Regression: smooth L1 summed over
    the 2*N+ offset components of positive anchors, divided by N+; dropped
    when there are no positives.
    """
    logits = out_sample[:, 0, :]  # (M, S)
    p = sigmoid(logits.reshape(-1))
    t = Tensor(targets.s.T.reshape(-1))
    cls = (losses.bce(p, t) + losses.dice(p, t)) * 0.5

    if targets.n_pos == 0:
        return cls
    mask = targets.s.T > 0  # (M, S)
    pred = concat([out_sample[:, 1, :][mask], out_sample[:, 2, :][mask]], axis=0)
    targ = Tensor(np.concatenate([targets.dd.T[mask], targets.dl.T[mask]]))
    # smooth_l1 is mean-reduced over 2*N+ elements; the contract divides by N+
    reg = losses.smooth_l1(pred, targ) * 2.0
    return cls + reg


def decode(
    out: np.ndarray, grid: AnchorGrid, score_threshold: float = 0.05
) -> tuple[list[PersonCircle], int]:
    """Proposals from a (sectors, M, 3) head output.

    Returns (proposals, n_discarded) where n_discarded counts decoded
    positions with non-positive range.
    """
    if out.shape != (grid.sectors, grid.anchors_per_sector, 3):
        raise ValueError(
            f"output shape {out.shape} does not match grid "
            f"({grid.sectors}, {grid.anchors_per_sector}, 3)"
        )
    scores = 1.0 / (1.0 + np.exp(-out[:, :, 0]))
    proposals: list[PersonCircle] = []
    discarded = 0
    for sec in range(grid.sectors):
        for j in range(grid.anchors_per_sector):
            score = scores[sec, j]
            if score < score_threshold:
                continue
            r_anchor = grid.radii[j]
            r = r_anchor + out[sec, j, 1] * grid.spacing
            if r <= 0:
                discarded += 1
                continue
            theta = grid.sector_angles[sec] + out[sec, j, 2] * grid.spacing / r_anchor
            proposals.append(
                detection_circle(
                    r * math.cos(theta), r * math.sin(theta),
                    NOMINAL_DETECTION_RADIUS, float(score),
                )
            )
    return proposals, discarded


def nms(proposals: list[PersonCircle], d_nms: float = DEFAULT_D_NMS) -> list[PersonCircle]:
    """Greedy center-distance NMS: keep by descending score (ties by input
    order, which decode emits in sector order)."""
    if d_nms <= 0:
        raise ValueError("d_nms must be positive")
    order = sorted(range(len(proposals)), key=lambda i: -proposals[i].score)
    kept: list[PersonCircle] = []
    for i in order:
        p = proposals[i]
        if all(center_distance(p, q) >= d_nms for q in kept):
            kept.append(p)
    return kept


def detect_ppn(
    scan: LaserScan,
    model: PpnModel,
    score_threshold: float = 0.05,
    d_nms: float = DEFAULT_D_NMS,
) -> list[PersonCircle]:
    """Full PPN detector on one scan: forward, decode, NMS."""
    grid = model.grid_for(scan.meta)
    proposals, _ = decode(model.predict(scan), grid, score_threshold)
    return nms(proposals, d_nms)


def make_ppn_items(ds: Dataset, indices, grid: AnchorGrid, tau: float):
    items = []
    for i in indices:
        scan, circles = scan_with_annotations(ds, int(i))
        items.append((preprocess_scan(scan), assign_targets(grid, circles, tau)))
    return items


def train_ppn(
    ds: Dataset,
    backbone_state: dict,
    config: LfeConfig = LfeConfig(),
    anchors_per_sector: int = 16,
    near: float = 0.3,
    far: float = 10.0,
    tau: float = DEFAULT_TAU,
    train_config: TrainConfig | None = None,
    freeze_backbone: bool = False,
    log=None,
) -> tuple[PpnModel, History]:
    """Fine-tune from segmentation backbone weights with the proposal loss.

    backbone_state holds ``backbone.*`` entries of a SegmentationModel
    state dict (as produced by train_segmentation / checkpoints).
    """
    if train_config is None:
        train_config = TrainConfig(
            epochs=150, batch_size=4, lr=1e-4, weight_decay=4e-4,
            patience=20, min_delta=1e-3, seed=config.seed,
        )
    model = PpnModel(config, anchors_per_sector, near, far)
    bb_state = {k[len("backbone."):]: v for k, v in backbone_state.items()
                if k.startswith("backbone.")}
    if not bb_state:
        raise ValueError("no backbone.* weights found in checkpoint state")
    model.backbone.load_state_dict(bb_state)

    grid = model.grid_for(ds.meta)
    train_idx, val_idx = benchmark_views(ds)
    train_items = make_ppn_items(ds, train_idx, grid, tau)
    val_items = make_ppn_items(ds, val_idx, grid, tau)

    def loss_fn(m, batch):
        x = Tensor(np.stack([b[0] for b in batch]))
        out = m(x)
        total = None
        for k, (_, targets) in enumerate(batch):
            item = ppn_loss(out[k], targets)
            total = item if total is None else total + item
        return total * (1.0 / len(batch))

    trainable = None
    if freeze_backbone:
        bb_ids = {id(p) for p in model.backbone.parameters()}
        trainable = [p for p in model.parameters() if id(p) not in bb_ids]

    history = train_loop(model, loss_fn, train_items, val_items, train_config,
                         log=log, trainable=trainable)
    return model, history
