import numpy as np
import pytest

from scandet.dataset import Dataset
from scandet.geometry import FROG_META, SensorMeta


def make_dataset(rng: np.random.Generator, n_scans: int = 5,
                 meta: SensorMeta = FROG_META, with_split: bool = True) -> Dataset:
    """Small random-but-valid dataset for IO and service tests."""
    scans = rng.uniform(0.5, meta.range_max, size=(n_scans, meta.num_points))
    scans[rng.random(scans.shape) < 0.05] = 60.0
    timestamps = 1.6e9 + np.arange(n_scans) * 0.025
    circle_num = rng.integers(0, 4, size=n_scans).astype(np.uint32)
    rows = []
    for n in circle_num:
        for _ in range(n):
            r = float(rng.uniform(0.1, 0.4))
            dist = float(rng.uniform(r + 0.2, meta.range_max - 0.5))
            ang = float(rng.uniform(meta.angle_min, meta.angles[-1]))
            rows.append(
                [dist * np.cos(ang), dist * np.sin(ang), r, ang, dist,
                 np.arcsin(r / dist)]
            )
    circles = (
        np.asarray(rows, dtype=np.float32)
        if rows
        else np.zeros((0, 6), dtype=np.float32)
    )
    circle_idx = np.zeros(n_scans, dtype=np.uint32)
    circle_idx[1:] = np.cumsum(circle_num)[:-1]
    split = (
        (rng.random(n_scans) < 0.1).astype(np.uint8) if with_split else None
    )
    return Dataset(
        scans=scans.astype(np.float32),
        timestamps=timestamps.astype(np.float64),
        circles=circles,
        circle_idx=circle_idx,
        circle_num=circle_num,
        split=split,
        meta=meta,
    )


@pytest.fixture(scope="session")
def toy_dataset():
    """Small simulated dataset shared by detector/service tests."""
    from scandet.simulate import SimConfig, generate_dataset

    return generate_dataset(SimConfig(), 60, 1234)


@pytest.fixture(scope="session")
def toy_dataset_path(toy_dataset, tmp_path_factory):
    from scandet.dataset import save_dataset

    path = tmp_path_factory.mktemp("data") / "toy.h5"
    save_dataset(toy_dataset, path)
    return path
