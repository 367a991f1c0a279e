"""Trajectory-based density estimation on hierarchical 2^d-trees."""
from .core import (
    CurvatureBound,
    ParamInterval,
    Trajectory,
    estimate_curvature_max,
    interpolate,
    time_delay_embed,
)
from .counts import disk_count, robust_square_count, square_count
from .tred import (
    TredParams,
    TredTree,
    build_offline,
    level_set_raster,
    rebuild,
    superlevel_samples,
    update,
)

__version__ = "0.1.0"

__all__ = [
    "CurvatureBound",
    "ParamInterval",
    "Trajectory",
    "estimate_curvature_max",
    "interpolate",
    "time_delay_embed",
    "disk_count",
    "square_count",
    "robust_square_count",
    "TredParams",
    "TredTree",
    "build_offline",
    "update",
    "rebuild",
    "superlevel_samples",
    "level_set_raster",
]
