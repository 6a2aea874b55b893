"""Fully-dynamic consistent clustering: fractional maintenance plus rounding."""

from __future__ import annotations

__version__ = "0.1.0"

from .body import Body, FractionalState, InfeasibleBodyError, project
from .metric import HST, MetricSpace, PointRole, build_hst, from_distance_matrix, from_feature_rows

__all__ = [
    "Body",
    "FractionalState",
    "HST",
    "InfeasibleBodyError",
    "MetricSpace",
    "PointRole",
    "build_hst",
    "from_distance_matrix",
    "from_feature_rows",
    "project",
    "__version__",
]
