"""Reader/writer for the HDF5 scan dataset layout, plus odometry and exports.

File layout (HDF5 dataset names and element types are normative):

    scans       (N, 720) float32   ranges in meters, 60.0 = no return
    timestamps  (N,)     float64   seconds since the UTC Unix epoch
    circles     (M, 6)   float32   columns: x, y, radius, angle, distance,
                                   half_angle
    circle_idx  (N,)     uint32    index of each scan's first annotation
    circle_num  (N,)     uint32    number of annotations per scan
    split       (N,)     uint8     optional; 0 = training, 1 = validation

Odometry ships as CSV with header ``ts,x,y,zrot``. Annotation exports are
CSV/JSON with a schema_version field; see export_annotations.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import h5py
import numpy as np

from .geometry import (
    FILE_INVALID_SENTINEL,
    FROG_META,
    LaserScan,
    PersonCircle,
    SensorMeta,
    circle_from_center,
)

EXPORT_SCHEMA_VERSION = 1

CIRCLE_COLUMNS = ("x", "y", "radius", "angle", "distance", "half_angle")


class DatasetError(ValueError):
    """Raised when a dataset file violates the format invariants."""


@dataclass(frozen=True)
class Dataset:
    scans: np.ndarray
    timestamps: np.ndarray
    circles: np.ndarray
    circle_idx: np.ndarray
    circle_num: np.ndarray
    split: Optional[np.ndarray] = None
    meta: SensorMeta = FROG_META

    @property
    def num_scans(self) -> int:
        return self.scans.shape[0]

    @property
    def num_circles(self) -> int:
        return self.circles.shape[0]


def validate_dataset(ds: Dataset) -> None:
    """Check every format invariant; raise DatasetError on the first failure."""
    n = ds.scans.shape[0]
    if ds.scans.ndim != 2 or ds.scans.shape[1] != ds.meta.num_points:
        raise DatasetError(
            f"scans: expected shape (N, {ds.meta.num_points}), got {ds.scans.shape}"
        )
    for name, arr, shape in (
        ("timestamps", ds.timestamps, (n,)),
        ("circle_idx", ds.circle_idx, (n,)),
        ("circle_num", ds.circle_num, (n,)),
    ):
        if arr.shape != shape:
            raise DatasetError(f"{name}: expected shape {shape}, got {arr.shape}")
    if ds.circles.ndim != 2 or ds.circles.shape[1] != 6:
        raise DatasetError(f"circles: expected shape (M, 6), got {ds.circles.shape}")
    if not np.all(np.isfinite(ds.timestamps)):
        i = int(np.flatnonzero(~np.isfinite(ds.timestamps))[0])
        raise DatasetError(f"timestamps: non-finite value at index {i}")

    m = ds.circles.shape[0]
    end = ds.circle_idx.astype(np.int64) + ds.circle_num.astype(np.int64)
    if np.any(end > m):
        i = int(np.flatnonzero(end > m)[0])
        raise DatasetError(
            f"circle_idx/circle_num: scan {i} references rows past M={m}"
        )
    # sequential layout: each scan's block starts where the previous ended
    expected_idx = np.concatenate([[0], np.cumsum(ds.circle_num.astype(np.int64))[:-1]])
    if n and np.any(ds.circle_idx.astype(np.int64) != expected_idx):
        i = int(np.flatnonzero(ds.circle_idx.astype(np.int64) != expected_idx)[0])
        raise DatasetError(f"circle_idx: non-sequential annotation layout at scan {i}")
    if n and int(end[-1]) != m:
        raise DatasetError(
            f"circles: {m} rows but annotation blocks cover {int(end[-1])}"
        )

    if ds.split is not None:
        if ds.split.shape != (n,):
            raise DatasetError(f"split: expected shape ({n},), got {ds.split.shape}")
        if np.any((ds.split != 0) & (ds.split != 1)):
            i = int(np.flatnonzero((ds.split != 0) & (ds.split != 1))[0])
            raise DatasetError(f"split: value not in {{0,1}} at index {i}")

    if m:
        x, y, radius, angle, dist, half = (ds.circles[:, k] for k in range(6))
        if not np.all(np.isfinite(ds.circles)):
            i = int(np.flatnonzero(~np.isfinite(ds.circles).all(axis=1))[0])
            raise DatasetError(f"circles: non-finite row {i}")
        if np.any(radius <= 0):
            i = int(np.flatnonzero(radius <= 0)[0])
            raise DatasetError(f"circles: non-positive radius at row {i}")
        # float32 storage: verify polar fields against x/y at float32 precision
        expect_d = np.hypot(x, y)
        expect_a = np.arctan2(y, x)
        tol = 1e-5 * np.maximum(1.0, expect_d)
        if np.any(np.abs(dist - expect_d) > tol):
            i = int(np.flatnonzero(np.abs(dist - expect_d) > tol)[0])
            raise DatasetError(f"circles: distance inconsistent with x/y at row {i}")
        if np.any(np.abs(angle - expect_a) > 1e-5):
            i = int(np.flatnonzero(np.abs(angle - expect_a) > 1e-5)[0])
            raise DatasetError(f"circles: angle inconsistent with x/y at row {i}")
        ok = radius < expect_d
        if np.any(~ok):
            i = int(np.flatnonzero(~ok)[0])
            raise DatasetError(f"circles: circle contains the origin at row {i}")
        expect_h = np.arcsin(np.clip(radius / expect_d, 0.0, 1.0))
        if np.any(np.abs(half - expect_h) > 1e-5):
            i = int(np.flatnonzero(np.abs(half - expect_h) > 1e-5)[0])
            raise DatasetError(f"circles: half_angle inconsistent at row {i}")


def load_dataset(path, meta: SensorMeta = FROG_META) -> Dataset:
    """Load and strictly validate a dataset file."""
    path = Path(path)
    with h5py.File(path, "r") as f:
        required = ("scans", "timestamps", "circles", "circle_idx", "circle_num")
        for name in required:
            if name not in f:
                raise DatasetError(f"{path}: missing dataset '{name}'")
        ds = Dataset(
            scans=f["scans"][...].astype(np.float32, copy=False),
            timestamps=f["timestamps"][...].astype(np.float64, copy=False),
            circles=f["circles"][...].astype(np.float32, copy=False).reshape(-1, 6),
            circle_idx=f["circle_idx"][...].astype(np.uint32, copy=False),
            circle_num=f["circle_num"][...].astype(np.uint32, copy=False),
            split=f["split"][...].astype(np.uint8, copy=False) if "split" in f else None,
            meta=meta,
        )
    validate_dataset(ds)
    return ds


def save_dataset(ds: Dataset, path) -> None:
    """Write a dataset file; round trips bit-exactly through load_dataset."""
    validate_dataset(ds)
    path = Path(path)
    with h5py.File(path, "w") as f:
        f.create_dataset("scans", data=ds.scans.astype(np.float32))
        f.create_dataset("timestamps", data=ds.timestamps.astype(np.float64))
        f.create_dataset("circles", data=ds.circles.astype(np.float32).reshape(-1, 6))
        f.create_dataset("circle_idx", data=ds.circle_idx.astype(np.uint32))
        f.create_dataset("circle_num", data=ds.circle_num.astype(np.uint32))
        if ds.split is not None:
            f.create_dataset("split", data=ds.split.astype(np.uint8))


def circles_from_rows(rows: np.ndarray, person_ids=None) -> list[PersonCircle]:
    out = []
    for k, row in enumerate(np.asarray(rows, dtype=np.float64).reshape(-1, 6)):
        out.append(
            PersonCircle(
                x=float(row[0]),
                y=float(row[1]),
                radius=float(row[2]),
                angle=float(row[3]),
                distance=float(row[4]),
                half_angle=float(row[5]),
                person_id=None if person_ids is None else person_ids[k],
            )
        )
    return out


def circle_to_row(c: PersonCircle) -> np.ndarray:
    return np.array(
        [c.x, c.y, c.radius, c.angle, c.distance, c.half_angle], dtype=np.float32
    )


def scan_with_annotations(ds: Dataset, i: int) -> tuple[LaserScan, list[PersonCircle]]:
    """Scan i together with its annotated person circles."""
    if not 0 <= i < ds.num_scans:
        raise IndexError(f"scan index {i} out of range [0, {ds.num_scans})")
    ranges = ds.scans[i].astype(np.float64)
    ranges = np.where(ranges >= FILE_INVALID_SENTINEL, np.inf, ranges)
    scan = LaserScan(ranges=ranges, timestamp=float(ds.timestamps[i]), meta=ds.meta)
    lo = int(ds.circle_idx[i])
    hi = lo + int(ds.circle_num[i])
    return scan, circles_from_rows(ds.circles[lo:hi])


def benchmark_views(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Training/validation scan indices: split by the split array, with
    empty-annotation scans excluded from both views."""
    if ds.split is None:
        raise DatasetError("dataset has no split array")
    nonempty = ds.circle_num > 0
    idx = np.arange(ds.num_scans)
    train = idx[(ds.split == 0) & nonempty]
    val = idx[(ds.split == 1) & nonempty]
    return train, val


@dataclass(frozen=True)
class OdometrySeries:
    """Robot odometry samples: x, y (meters) and z rotation (radians).

    Values are relative to an arbitrary initial state; only differences
    between samples are meaningful.
    """

    ts: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=np.float64)
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "data", data)
        if ts.ndim != 1 or data.shape != (ts.shape[0], 3):
            raise ValueError(f"bad odometry shapes {ts.shape}, {data.shape}")
        if ts.shape[0] < 1 or np.any(np.diff(ts) <= 0):
            raise ValueError("odometry timestamps must be strictly increasing")


def load_odometry(path) -> OdometrySeries:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    return OdometrySeries(ts=rows[:, 0], data=rows[:, 1:4])


def save_odometry(od: OdometrySeries, path) -> None:
    with open(path, "w", newline="") as f:
        f.write("ts,x,y,zrot\n")
        for t, (x, y, z) in zip(od.ts, od.data):
            f.write(f"{float(t)!r},{float(x)!r},{float(y)!r},{float(z)!r}\n")


def interpolate_odometry(od: OdometrySeries, t: float) -> tuple[float, float, float]:
    """Robot state at time t: linear in x/y, shortest-arc in rotation."""
    if not od.ts[0] <= t <= od.ts[-1]:
        raise ValueError(f"t={t} outside odometry span [{od.ts[0]}, {od.ts[-1]}]")
    x = float(np.interp(t, od.ts, od.data[:, 0]))
    y = float(np.interp(t, od.ts, od.data[:, 1]))
    zrot_unwrapped = np.unwrap(od.data[:, 2])
    z = float(np.interp(t, od.ts, zrot_unwrapped))
    # back to (-pi, pi]
    z = -((-z + math.pi) % (2 * math.pi) - math.pi)
    return x, y, z


def _annotation_records(ds: Dataset) -> list[dict]:
    records = []
    for i in range(ds.num_scans):
        lo = int(ds.circle_idx[i])
        for k in range(int(ds.circle_num[i])):
            row = ds.circles[lo + k]
            records.append(
                {
                    "scan_index": i,
                    "timestamp": float(ds.timestamps[i]),
                    "person_id": None,
                    "x": float(row[0]),
                    "y": float(row[1]),
                    "radius": float(row[2]),
                }
            )
    return records


def export_annotations(ds: Dataset, path, format: str = "json") -> None:
    """Write one record per circle (scan index, timestamp, person id, x, y,
    radius) as JSON or CSV."""
    records = _annotation_records(ds)
    path = Path(path)
    if format == "json":
        doc = {"schema_version": EXPORT_SCHEMA_VERSION, "annotations": records}
        path.write_text(json.dumps(doc, indent=1))
    elif format == "csv":
        with open(path, "w", newline="") as f:
            f.write(f"# schema_version: {EXPORT_SCHEMA_VERSION}\n")
            writer = csv.DictWriter(
                f, fieldnames=["scan_index", "timestamp", "person_id", "x", "y", "radius"]
            )
            writer.writeheader()
            for rec in records:
                writer.writerow({**rec, "person_id": rec["person_id"] or ""})
    else:
        raise ValueError(f"unknown export format {format!r}")


def import_annotations(path) -> list[dict]:
    """Parse an annotation export (JSON or CSV) back into records."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("schema_version") != EXPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {doc.get('schema_version')}")
        return doc["annotations"]
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    records = []
    for row in csv.DictReader(lines):
        records.append(
            {
                "scan_index": int(row["scan_index"]),
                "timestamp": float(row["timestamp"]),
                "person_id": int(row["person_id"]) if row["person_id"] else None,
                "x": float(row["x"]),
                "y": float(row["y"]),
                "radius": float(row["radius"]),
            }
        )
    return records


def records_to_circles(records) -> dict[int, list[PersonCircle]]:
    """Group imported annotation records into per-scan circle lists."""
    by_scan: dict[int, list[PersonCircle]] = {}
    for rec in records:
        c = circle_from_center(
            rec["x"], rec["y"], rec["radius"], person_id=rec.get("person_id")
        )
        by_scan.setdefault(int(rec["scan_index"]), []).append(c)
    return by_scan
