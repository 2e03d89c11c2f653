"""Position-orientation domain: lifted points, grid spacing, interpolation.

The solver works on a Cartesian discretization of Omega x S^1 where Omega is
a pixel rectangle.  Physical axes share one spacing ``hx`` (default 1 pixel)
while the angular axis has spacing ``htheta = 2*pi / ntheta`` and wraps
around.  Field arrays over the grid use shape ``(ntheta, ny, nx)`` so that a
C-order flattening is x-fastest, then y, then theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def reduce_angle(theta: float) -> float:
    """Reduce an angle to the canonical interval [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:
        t = 0.0
    return t


def angular_difference(a: float, b: float) -> float:
    """Signed representative of ``a - b`` in (-pi, pi]."""
    d = math.fmod(a - b, TWO_PI)
    if d <= -math.pi:
        d += TWO_PI
    elif d > math.pi:
        d -= TWO_PI
    return d


@dataclass(frozen=True)
class LiftedPoint:
    """A planar position (pixels) together with an orientation (radians).

    ``theta`` is stored reduced to [0, 2*pi) so wall-side tests are
    unambiguous.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)
                and math.isfinite(self.theta)):
            raise ValueError("lifted point components must be finite")
        object.__setattr__(self, "theta", reduce_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class TangentVector:
    """Velocity on the lifted domain: planar speed plus angular speed."""

    dx: float
    dy: float
    dtheta: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)
                and math.isfinite(self.dtheta)):
            raise ValueError("tangent components must be finite")

    @property
    def planar_norm(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class CoVector:
    """Co-tangent vector on the lifted domain."""

    hx: float
    hy: float
    htheta: float

    def __post_init__(self):
        if not (math.isfinite(self.hx) and math.isfinite(self.hy)
                and math.isfinite(self.htheta)):
            raise ValueError("co-vector components must be finite")


@dataclass(frozen=True)
class GridSpec:
    """Cartesian discretization of the position-orientation domain.

    nx, ny   -- physical sample counts (x = column, y = row)
    ntheta   -- number of discrete orientations
    hx       -- physical spacing in pixels, shared by both planar axes
    """

    nx: int
    ny: int
    ntheta: int
    hx: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs nx, ny >= 2")
        if self.ntheta < 4:
            raise ValueError("grid needs ntheta >= 4")
        if not (self.hx > 0.0 and math.isfinite(self.hx)):
            raise ValueError("hx must be positive and finite")

    @property
    def htheta(self) -> float:
        return TWO_PI / self.ntheta

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape for fields sampled on the grid: (ntheta, ny, nx)."""
        return (self.ntheta, self.ny, self.nx)

    @property
    def num_nodes(self) -> int:
        return self.ntheta * self.ny * self.nx

    def theta_of_level(self, itheta: int) -> float:
        return (itheta % self.ntheta) * self.htheta

    def nearest_level(self, theta: float) -> int:
        return int(round(reduce_angle(theta) / self.htheta)) % self.ntheta

    def flat_index(self, idx: tuple[int, int, int]) -> int:
        ix, iy, it = idx
        return (it * self.ny + iy) * self.nx + ix

    def in_bounds(self, idx: tuple[int, int, int]) -> bool:
        ix, iy, it = idx
        return 0 <= ix < self.nx and 0 <= iy < self.ny and 0 <= it < self.ntheta


def index_to_point(idx: tuple[int, int, int], spec: GridSpec) -> LiftedPoint:
    """Physical coordinates of the grid node ``idx = (ix, iy, itheta)``."""
    ix, iy, it = idx
    if not spec.in_bounds((ix, iy, it)):
        raise ValueError(f"grid index {idx!r} out of range for {spec!r}")
    return LiftedPoint(ix * spec.hx, iy * spec.hx, it * spec.htheta)


def point_to_continuous(p: LiftedPoint, spec: GridSpec) -> tuple[float, float, float]:
    """Continuous grid coordinates (gx, gy, gt) of a lifted point."""
    return (p.x / spec.hx, p.y / spec.hx, reduce_angle(p.theta) / spec.htheta)


_BOUNDS_SLACK = 1e-9


def interpolate_field(field: np.ndarray, p: LiftedPoint, spec: GridSpec):
    """Trilinear interpolation with wraparound on the theta axis.

    Accepts scalar fields of shape (ntheta, ny, nx) or vector fields with
    trailing component axes, interpolated componentwise.  An infinite sample
    propagates to the result whenever its trilinear weight is nonzero, so
    interpolation stays exact on grid nodes that sit next to blocked
    (infinite) neighbors.
    """
    if field.ndim > 3:
        flat = field.reshape(spec.shape + (-1,))
        out = np.array([interpolate_field(flat[..., c], p, spec)
                        for c in range(flat.shape[-1])])
        return out.reshape(field.shape[3:])
    if field.shape != spec.shape:
        raise ValueError("field shape does not match the grid")
    gx, gy, gt = point_to_continuous(p, spec)
    if not (-_BOUNDS_SLACK <= gx <= spec.nx - 1 + _BOUNDS_SLACK
            and -_BOUNDS_SLACK <= gy <= spec.ny - 1 + _BOUNDS_SLACK):
        raise ValueError(f"point {p!r} outside the physical bounds")
    gx = min(max(gx, 0.0), float(spec.nx - 1))
    gy = min(max(gy, 0.0), float(spec.ny - 1))

    ix0 = min(int(gx), spec.nx - 2)
    iy0 = min(int(gy), spec.ny - 2)
    it0 = int(gt) % spec.ntheta
    fx = gx - ix0
    fy = gy - iy0
    ft = gt - int(gt)
    it1 = (it0 + 1) % spec.ntheta

    total = 0.0
    for dt, wt in ((it0, 1.0 - ft), (it1, ft)):
        if wt == 0.0:
            continue
        for dy, wy in ((iy0, 1.0 - fy), (iy0 + 1, fy)):
            if wy == 0.0:
                continue
            for dx, wx in ((ix0, 1.0 - fx), (ix0 + 1, fx)):
                w = wt * wy * wx
                if w == 0.0:
                    continue
                v = field[dt, dy, dx]
                if not math.isfinite(v):
                    return math.inf if v > 0 else -math.inf
                total += w * v
    return total
