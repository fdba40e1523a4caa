"""Homotopy continuation, variety sampling and reach computation for real algebraic varieties."""

from .poly import (
    ParseError,
    PolyError,
    Polynomial,
    PolySystem,
    bezout_number,
    differentiate,
    evaluate,
    jacobian,
    parse_system,
)
from .homotopy import (
    PathResult,
    PathStatus,
    SolutionSet,
    TrackerOptions,
    make_start,
    newton_refine,
    solve_all,
    track_path,
)
from .sampling import PointCloud, build_cyclooctane, nearest_point, nearest_sample, slice_sample
from .reach import DegenerateError, ReachReport, bottlenecks, max_curvature

__version__ = "0.1.0"

__all__ = [
    "ParseError",
    "PolyError",
    "Polynomial",
    "PolySystem",
    "bezout_number",
    "differentiate",
    "evaluate",
    "jacobian",
    "parse_system",
    "PathResult",
    "PathStatus",
    "SolutionSet",
    "TrackerOptions",
    "make_start",
    "newton_refine",
    "solve_all",
    "track_path",
    "PointCloud",
    "build_cyclooctane",
    "nearest_point",
    "nearest_sample",
    "slice_sample",
    "DegenerateError",
    "ReachReport",
    "bottlenecks",
    "max_curvature",
]
