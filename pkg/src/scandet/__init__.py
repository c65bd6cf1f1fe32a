"""2D-LiDAR people detection toolkit: synthetic data generation, two
trainable detectors (segmentation + peak extraction, and a polar
anchor-grid regressor), an evaluation benchmark, and an annotation
service."""

from .geometry import (
    FROG_META,
    INVALID_RANGE,
    LaserScan,
    PersonCircle,
    Point2D,
    SensorMeta,
    center_distance,
    circle_from_center,
    polar_to_cartesian,
    wrap_angle,
)

__version__ = "0.1.0"

__all__ = [
    "FROG_META",
    "INVALID_RANGE",
    "LaserScan",
    "PersonCircle",
    "Point2D",
    "SensorMeta",
    "center_distance",
    "circle_from_center",
    "polar_to_cartesian",
    "wrap_angle",
    "__version__",
]
