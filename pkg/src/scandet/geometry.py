"""Core scan geometry: sensor metadata, scans, points and person circles.

Coordinate convention follows standard robotics axes: X forward, Y left,
angles counterclockwise. Beam index 0 is the rightmost (most negative angle)
beam, so scans are effectively stored right-to-left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# A beam with no return is +inf in memory. On disk it is stored as a large
# finite sentinel (beyond any plausible return of the supported sensors).
INVALID_RANGE = math.inf
FILE_INVALID_SENTINEL = 60.0


@dataclass(frozen=True)
class SensorMeta:
    """Angular layout and limits of a 2D range finder."""

    num_points: int
    angle_min: float
    angle_increment: float
    range_max: float
    frequency: float

    def __post_init__(self):
        if self.num_points < 2:
            raise ValueError(f"num_points must be >= 2, got {self.num_points}")
        if self.angle_increment <= 0:
            raise ValueError("angle_increment must be positive")
        fov = (self.num_points - 1) * self.angle_increment
        if fov > 2 * math.pi + 1e-12:
            raise ValueError(f"field of view {fov} rad exceeds 360 degrees")
        if self.range_max <= 0:
            raise ValueError("range_max must be positive")

    @property
    def angles(self) -> np.ndarray:
        return self.angle_min + np.arange(self.num_points) * self.angle_increment

    def angle_of(self, index: int) -> float:
        return self.angle_min + index * self.angle_increment


#: 720 beams at 0.25 degrees spanning 180 degrees ([-90, +89.75]),
#: 10 m range, 40 Hz. The left FoV endpoint convention (beam 0 at -90 deg)
#: is a documented choice, not a property of the file format.
FROG_META = SensorMeta(
    num_points=720,
    angle_min=-math.pi / 2,
    angle_increment=math.radians(0.25),
    range_max=10.0,
    frequency=40.0,
)


@dataclass(frozen=True)
class LaserScan:
    """One full sweep: a range per beam plus a timestamp."""

    ranges: np.ndarray
    timestamp: float
    meta: SensorMeta

    def __post_init__(self):
        ranges = np.asarray(self.ranges, dtype=np.float64)
        object.__setattr__(self, "ranges", ranges)
        if ranges.shape != (self.meta.num_points,):
            raise ValueError(
                f"ranges shape {ranges.shape} != ({self.meta.num_points},)"
            )
        finite = ranges[np.isfinite(ranges)]
        if finite.size and finite.min() < 0:
            raise ValueError("finite ranges must be >= 0")

    def valid_mask(self) -> np.ndarray:
        """Beams that produced a usable return."""
        r = self.ranges
        return np.isfinite(r) & (r >= 0) & (r <= self.meta.range_max)


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float


@dataclass(frozen=True)
class PersonCircle:
    """A person annotation or detection: a circle in the sensor plane.

    Carries both Cartesian (x, y) and polar (angle, distance, half_angle)
    representations, kept mutually consistent by :func:`circle_from_center`.
    """

    x: float
    y: float
    radius: float
    angle: float
    distance: float
    half_angle: float
    person_id: Optional[int] = None
    score: Optional[float] = field(default=None)


def circle_from_center(
    x: float,
    y: float,
    radius: float,
    person_id: Optional[int] = None,
    score: Optional[float] = None,
) -> PersonCircle:
    """Build a PersonCircle with all geometric fields populated.

    Rejects circles that contain the sensor origin (radius >= distance),
    for which the projected half-angle is undefined.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    distance = math.hypot(x, y)
    if distance == 0.0:
        raise ValueError("circle center cannot be the sensor origin")
    if radius >= distance:
        raise ValueError(
            f"circle (r={radius}) contains the sensor origin (d={distance})"
        )
    return PersonCircle(
        x=float(x),
        y=float(y),
        radius=float(radius),
        angle=math.atan2(y, x),
        distance=distance,
        half_angle=math.asin(radius / distance),
        person_id=person_id,
        score=score,
    )


def detection_circle(x: float, y: float, radius: float, score: float) -> PersonCircle:
    """PersonCircle for a detector output. Unlike ground-truth circles these
    may sit arbitrarily close to the origin; the projected half-angle
    saturates at pi/2 when the circle would contain the sensor."""
    distance = math.hypot(x, y)
    half_angle = math.asin(radius / distance) if radius < distance else math.pi / 2
    return PersonCircle(
        x=float(x),
        y=float(y),
        radius=float(radius),
        angle=math.atan2(y, x),
        distance=distance,
        half_angle=half_angle,
        score=float(score),
    )


def center_distance(a: PersonCircle, b: PersonCircle) -> float:
    """Euclidean distance between circle centers."""
    return math.hypot(a.x - b.x, a.y - b.y)


def polar_to_cartesian(scan: LaserScan) -> tuple[np.ndarray, np.ndarray]:
    """Project every beam to Cartesian coordinates.

    Returns (points, valid): an (N, 2) array of x/y coordinates and a boolean
    mask. Invalid beams (no return or out of range) keep a placeholder row
    and are flagged False; downstream point sets must apply the mask.
    """
    angles = scan.meta.angles
    r = np.where(scan.valid_mask(), scan.ranges, 0.0)
    points = np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1)
    return points, scan.valid_mask()


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    out = -((-np.asarray(a) + np.pi) % (2 * np.pi) - np.pi)
    return float(out) if np.isscalar(a) else out
