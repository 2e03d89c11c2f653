"""geokonvex: globally optimal convex closed curves on images.

Curvature-penalized geodesics with a convexity shape prior, computed by
single-pass fast marching on a position-orientation grid, plus the
region-driven contour evolution loop, a CLI, and an HTTP service.
"""

from .grid import CoVector, GridSpec, LiftedPoint, TangentVector
from .models import ModelFamily, ModelKind, ModelParams

__version__ = "0.1.0"

__all__ = [
    "CoVector",
    "GridSpec",
    "LiftedPoint",
    "TangentVector",
    "ModelFamily",
    "ModelKind",
    "ModelParams",
    "__version__",
]
