"""Deterministic 2D world simulator producing labeled scans.

Worlds contain wall segments, static pillars and walking people modeled as
two leg circles (fixed lateral stance, antiphase swing along the heading).
Rendering raycasts every beam against all primitives, adds Gaussian range
noise, and emits ground-truth circles for people that return at least one
beam. Occlusion is emergent: a fully occluded person produces no points and
no ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .dataset import Dataset, circle_to_row, validate_dataset
from .geometry import FROG_META, LaserScan, PersonCircle, SensorMeta, circle_from_center

GT_RADIUS_MARGIN = 0.05
EPOCH_T0 = 1.6e9  # fixed base timestamp for generated datasets


@dataclass(frozen=True)
class PersonState:
    x: float
    y: float
    heading: float
    speed: float
    leg_separation: float
    leg_radius: float
    gait_phase: float
    person_id: int

    def __post_init__(self):
        if not 0.10 <= self.leg_separation <= 0.45:
            raise ValueError(f"leg_separation {self.leg_separation} out of [0.10, 0.45]")
        if not 0.04 <= self.leg_radius <= 0.09:
            raise ValueError(f"leg_radius {self.leg_radius} out of [0.04, 0.09]")
        if not 0.0 <= self.speed <= 2.0:
            raise ValueError(f"speed {self.speed} out of [0, 2]")

    @property
    def gt_radius(self) -> float:
        return self.leg_separation / 2 + self.leg_radius + GT_RADIUS_MARGIN

    def leg_circles(self) -> np.ndarray:
        """Two (cx, cy, r) rows: lateral stance plus longitudinal gait swing."""
        hx, hy = math.cos(self.heading), math.sin(self.heading)
        px, py = -hy, hx
        half = self.leg_separation / 2
        swing = min(0.1, half) * math.sin(self.gait_phase)
        legs = np.empty((2, 3))
        for k, side in enumerate((1.0, -1.0)):
            legs[k, 0] = self.x + side * px * half + side * hx * swing
            legs[k, 1] = self.y + side * py * half + side * hy * swing
            legs[k, 2] = self.leg_radius
        return legs


@dataclass(frozen=True)
class World:
    segments: np.ndarray  # (S, 4) wall segments ax, ay, bx, by
    pillars: np.ndarray  # (P, 3) cx, cy, r
    people: tuple[PersonState, ...]
    bounds: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    rng_seed: int


@dataclass(frozen=True)
class SimConfig:
    arena: tuple[float, float, float, float] = (-1.0, 9.0, -6.0, 6.0)
    n_pillars: int = 3
    n_people: int = 3
    noise_sigma: float = 0.01
    meta: SensorMeta = FROG_META
    origin_clearance: float = 0.7  # keep obstacles/people away from the sensor


def _arena_segments(bounds) -> np.ndarray:
    x0, x1, y0, y1 = bounds
    return np.array(
        [
            [x0, y0, x1, y0],
            [x1, y0, x1, y1],
            [x1, y1, x0, y1],
            [x0, y1, x0, y0],
        ]
    )


def _clear_of(x, y, r, pillars, others, bounds, origin_clearance):
    x0, x1, y0, y1 = bounds
    if not (x0 + r < x < x1 - r and y0 + r < y < y1 - r):
        return False
    if math.hypot(x, y) < origin_clearance + r:
        return False
    for cx, cy, cr in pillars:
        if math.hypot(x - cx, y - cy) < r + cr:
            return False
    for ox, oy, orad in others:
        if math.hypot(x - ox, y - oy) < r + orad:
            return False
    return True


def generate_world(config: SimConfig, seed: int) -> World:
    """Place pillars and people collision-free; deterministic in (config, seed)."""
    rng = np.random.default_rng(seed)
    bounds = config.arena
    x0, x1, y0, y1 = bounds

    pillars = []
    for _ in range(config.n_pillars):
        for _attempt in range(1000):
            r = rng.uniform(0.15, 0.45)
            x = rng.uniform(x0 + r, x1 - r)
            y = rng.uniform(y0 + r, y1 - r)
            if _clear_of(x, y, r, pillars, [], bounds, config.origin_clearance):
                pillars.append((x, y, r))
                break
        else:
            raise RuntimeError("could not place pillars collision-free")

    people = []
    placed = []
    for pid in range(config.n_people):
        for _attempt in range(1000):
            sep = rng.uniform(0.15, 0.35)
            leg_r = rng.uniform(0.05, 0.08)
            radius = sep / 2 + leg_r + GT_RADIUS_MARGIN
            x = rng.uniform(x0 + 1.0, x1 - 1.0)
            y = rng.uniform(y0 + 1.0, y1 - 1.0)
            if not _clear_of(x, y, radius + 0.1, pillars, placed, bounds,
                             config.origin_clearance):
                continue
            people.append(
                PersonState(
                    x=x,
                    y=y,
                    heading=rng.uniform(-math.pi, math.pi),
                    speed=rng.uniform(0.3, 1.5),
                    leg_separation=sep,
                    leg_radius=leg_r,
                    gait_phase=rng.uniform(0, 2 * math.pi),
                    person_id=pid,
                )
            )
            placed.append((x, y, radius + 0.1))
            break
        else:
            raise RuntimeError("could not place people collision-free")

    return World(
        segments=_arena_segments(bounds),
        pillars=np.array(pillars, dtype=np.float64).reshape(-1, 3),
        people=tuple(people),
        bounds=bounds,
        rng_seed=seed,
    )


def step_world(world: World, dt: float) -> World:
    """Advance people by speed*dt; turn deterministically near obstacles."""
    new_people = []
    for i, p in enumerate(world.people):
        others = [
            (q.x, q.y, q.gt_radius)
            for j, q in enumerate(world.people)
            if j != i
        ]
        phase = (p.gait_phase + 2 * math.pi * (0.8 + p.speed / 0.6) * dt) % (2 * math.pi)
        nx = p.x + p.speed * dt * math.cos(p.heading)
        ny = p.y + p.speed * dt * math.sin(p.heading)
        if _clear_of(nx, ny, p.gt_radius, world.pillars, others, world.bounds, 0.7):
            new_people.append(replace(p, x=nx, y=ny, gait_phase=phase))
        else:
            # blocked: stay put and re-aim with a deterministic jitter
            turn = math.pi + 0.9 * math.sin(1.7 * p.person_id + 3.1 * phase)
            heading = math.atan2(
                math.sin(p.heading + turn), math.cos(p.heading + turn)
            )
            new_people.append(replace(p, heading=heading, gait_phase=phase))
    return World(
        segments=world.segments,
        pillars=world.pillars,
        people=tuple(new_people),
        bounds=world.bounds,
        rng_seed=world.rng_seed,
    )


def _all_leg_circles(world: World) -> np.ndarray:
    if not world.people:
        return np.zeros((0, 3))
    return np.concatenate([p.leg_circles() for p in world.people], axis=0)


def render_scan(
    world: World,
    meta: SensorMeta = FROG_META,
    sensor_pose: tuple[float, float, float] = (0.0, 0.0, 0.0),
    noise_sigma: float = 0.01,
    rng: Optional[np.random.Generator] = None,
    timestamp: float = 0.0,
) -> tuple[LaserScan, list[PersonCircle]]:
    """Raycast one scan and return it with the visible-person ground truth."""
    ox, oy, otheta = sensor_pose
    angles = otheta + meta.angles
    legs = _all_leg_circles(world)
    circles = np.concatenate([world.pillars, legs], axis=0)
    ranges = _kernels.raycast(ox, oy, angles, world.segments, circles)
    ranges = np.where(ranges <= meta.range_max, ranges, np.inf)

    gt: list[PersonCircle] = []
    for p in world.people:
        own = _kernels.raycast(ox, oy, angles, np.zeros((0, 4)), p.leg_circles())
        visible = np.any((own <= ranges + 1e-9) & (own <= meta.range_max))
        if visible:
            gt.append(
                circle_from_center(p.x, p.y, p.gt_radius, person_id=p.person_id)
            )

    if noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        noisy = ranges + rng.normal(0.0, noise_sigma, size=ranges.shape)
        noisy = np.maximum(noisy, 0.0)
        ranges = np.where(np.isfinite(ranges) & (noisy <= meta.range_max), noisy, ranges)

    scan = LaserScan(ranges=ranges, timestamp=timestamp, meta=meta)
    return scan, gt


def generate_dataset(config: SimConfig, n_scans: int, seed: int) -> Dataset:
    """Step a world at the sensor frequency and assemble a dataset with a
    90:10 train/validation split. Deterministic in (config, n_scans, seed)."""
    from .geometry import FILE_INVALID_SENTINEL

    meta = config.meta
    world = generate_world(config, seed)
    dt = 1.0 / meta.frequency

    scans = np.empty((n_scans, meta.num_points), dtype=np.float32)
    timestamps = np.empty(n_scans, dtype=np.float64)
    circle_rows: list[np.ndarray] = []
    circle_idx = np.zeros(n_scans, dtype=np.uint32)
    circle_num = np.zeros(n_scans, dtype=np.uint32)

    for i in range(n_scans):
        rng = np.random.default_rng([seed, i])
        scan, gt = render_scan(
            world,
            meta=meta,
            noise_sigma=config.noise_sigma,
            rng=rng,
            timestamp=EPOCH_T0 + i * dt,
        )
        ranges = np.where(np.isfinite(scan.ranges), scan.ranges, FILE_INVALID_SENTINEL)
        scans[i] = ranges.astype(np.float32)
        timestamps[i] = scan.timestamp
        circle_idx[i] = len(circle_rows)
        circle_num[i] = len(gt)
        circle_rows.extend(circle_to_row(c) for c in gt)
        world = step_world(world, dt)

    split_rng = np.random.default_rng([seed, 0x5917])
    split = (split_rng.random(n_scans) < 0.1).astype(np.uint8)

    ds = Dataset(
        scans=scans,
        timestamps=timestamps,
        circles=np.array(circle_rows, dtype=np.float32).reshape(-1, 6),
        circle_idx=circle_idx,
        circle_num=circle_num,
        split=split,
        meta=meta,
    )
    validate_dataset(ds)
    return ds
