"""Search-space construction: walls, endpoint snapping, blocking predicates.

A closed convex curve through the source around the interior point ``z`` is
found as an open geodesic between two perturbed copies of the source, inside
a reduced domain: the half line from ``z`` through the source (extended to
the image border) is a wall, and for the convexity-constrained models the
source orientation is a wall in the angular axis.  User scribbles and
landmark points contribute further walls and blocked pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, ValidationError
from .grid import GridSpec, LiftedPoint, angular_difference, reduce_angle

_WALL_TOL = 1e-12


@dataclass(frozen=True)
class Annotation:
    """User inputs: oriented source point, optional z, scribbles, landmarks."""

    source_xy: tuple[float, float]
    source_theta: float
    z: tuple[float, float] | None = None
    fg_scribbles: list[np.ndarray] = field(default_factory=list)
    bg_scribbles: list[np.ndarray] = field(default_factory=list)
    landmarks: list[tuple[float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class Segment:
    """Planar wall segment; an open endpoint keeps a gap of ``gap_radius``."""

    p1: tuple[float, float]
    p2: tuple[float, float]
    open1: bool = False
    open2: bool = False


@dataclass(frozen=True)
class ObstacleSet:
    physical_segments: tuple[Segment, ...] = ()
    angular_wall: float | None = None
    blocked_mask: np.ndarray | None = None      # (ny, nx) bool
    gap_radius: float = 1.0

    def effective_segments(self) -> np.ndarray:
        """Wall segments with open endpoints trimmed back by the gap radius,
        packed as rows (x1, y1, x2, y2)."""
        rows = []
        for s in self.physical_segments:
            a = np.array(s.p1, dtype=float)
            b = np.array(s.p2, dtype=float)
            d = b - a
            length = float(np.hypot(*d))
            trim = (s.open1 + s.open2) * self.gap_radius
            if length <= trim + 1e-12:
                continue
            u = d / length
            if s.open1:
                a = a + u * self.gap_radius
            if s.open2:
                b = b - u * self.gap_radius
            rows.append([a[0], a[1], b[0], b[1]])
        if not rows:
            return np.zeros((0, 4))
        return np.array(rows)

    def with_extra_mask(self, mask: np.ndarray) -> "ObstacleSet":
        merged = mask.astype(bool)
        if self.blocked_mask is not None:
            merged = merged | self.blocked_mask
        return replace(self, blocked_mask=merged)


@dataclass(frozen=True)
class EndpointPair:
    p0: tuple[int, int, int]
    p1: tuple[int, int, int]


# ---------------------------------------------------------------------------
# validation & automatic z


def validate(ann: Annotation, z: tuple[float, float],
             spec: GridSpec) -> list[ValidationError]:
    """Geometric compatibility checks; returns an (possibly empty) error list."""
    errors: list[ValidationError] = []
    px, py = ann.source_xy
    zx, zy = z
    w = (spec.nx - 1) * spec.hx
    h = (spec.ny - 1) * spec.hx
    if not (0.0 <= px <= w and 0.0 <= py <= h):
        errors.append(ValidationError(
            f"source ({px}, {py}) outside the image", "annotation.source.outside"))
    if not (0.0 < zx < w and 0.0 < zy < h):
        errors.append(ValidationError(
            f"z ({zx}, {zy}) not strictly inside the image", "annotation.z.outside"))
    if math.hypot(px - zx, py - zy) < 1e-9:
        errors.append(ValidationError(
            "z coincides with the source point", "annotation.z.equals_source"))
    else:
        n = (math.cos(ann.source_theta), math.sin(ann.source_theta))
        det = (px - zx) * n[1] - (py - zy) * n[0]
        if det <= 0.0:
            errors.append(ValidationError(
                f"source orientation incompatible with z (det={det:.6g} <= 0)",
                "source.orientation.incompatible"))
    return errors


def _annotation_points(ann: Annotation) -> np.ndarray:
    pts = [np.array(ann.source_xy, dtype=float)[None, :]]
    for lm in ann.landmarks:
        pts.append(np.array(lm, dtype=float)[None, :])
    for s in ann.fg_scribbles:
        pts.append(np.asarray(s, dtype=float).reshape(-1, 2))
    return np.concatenate(pts, axis=0)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, no repeated endpoint."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) < 3:
        return np.array(pts)

    def half(seq):
        out: list[tuple[float, float]] = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])


def polygon_area_centroid(poly: np.ndarray) -> tuple[float, np.ndarray]:
    x = poly[:, 0]
    y = poly[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(np.sum(cross))
    if abs(area) < 1e-12:
        return 0.0, poly.mean(axis=0)
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return area, np.array([cx, cy])


def auto_z(ann: Annotation) -> tuple[float, float]:
    """Area centroid of the convex hull of the source, landmarks and
    foreground scribble points."""
    pts = _annotation_points(ann)
    hull = convex_hull(pts)
    if len(hull) < 3:
        raise ValidationError(
            "annotation points are collinear; provide z explicitly",
            "annotation.z.degenerate")
    area, centroid = polygon_area_centroid(hull)
    if abs(area) < 1e-9:
        raise ValidationError(
            "annotation hull has no area; provide z explicitly",
            "annotation.z.degenerate")
    return (float(centroid[0]), float(centroid[1]))


# ---------------------------------------------------------------------------
# obstacle construction


def _ray_box_exit(origin: np.ndarray, direction: np.ndarray,
                  spec: GridSpec) -> np.ndarray:
    """Where the ray origin + t*direction (t >= 0) leaves the image box."""
    w = (spec.nx - 1) * spec.hx
    h = (spec.ny - 1) * spec.hx
    tmax = math.inf
    for o, d, lo, hi in ((origin[0], direction[0], 0.0, w),
                         (origin[1], direction[1], 0.0, h)):
        if d > 1e-15:
            tmax = min(tmax, (hi - o) / d)
        elif d < -1e-15:
            tmax = min(tmax, (lo - o) / d)
    if not math.isfinite(tmax) or tmax < 0.0:
        raise ValidationError("ray does not leave the image box",
                              "annotation.ray.degenerate")
    return origin + tmax * direction


def rasterize_scribbles(scribbles: list[np.ndarray], spec: GridSpec) -> np.ndarray:
    """Paint polylines (or point sets) into a pixel mask, dilated by 1 px so
    thin strokes cannot slip between grid edges."""
    mask = np.zeros((spec.ny, spec.nx), dtype=bool)
    for s in scribbles:
        pts = np.asarray(s, dtype=float).reshape(-1, 2) / spec.hx
        if len(pts) == 1:
            segs = [(pts[0], pts[0])]
        else:
            segs = list(zip(pts[:-1], pts[1:]))
        for a, b in segs:
            n = max(2, int(np.hypot(*(b - a)) / 0.25) + 1)
            ts = np.linspace(0.0, 1.0, n)
            xs = np.clip(np.rint(a[0] + ts * (b[0] - a[0])).astype(int), 0, spec.nx - 1)
            ys = np.clip(np.rint(a[1] + ts * (b[1] - a[1])).astype(int), 0, spec.ny - 1)
            mask[ys, xs] = True
    if mask.any():
        mask = ndimage.binary_dilation(mask, structure=np.ones((3, 3), dtype=bool))
    return mask


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    den = float(d @ d)
    if den < 1e-18:
        return float(np.hypot(*(p - a)))
    t = min(max(float((p - a) @ d) / den, 0.0), 1.0)
    return float(np.hypot(*(p - (a + t * d))))


def build_search_space(ann: Annotation, spec: GridSpec,
                       eps_endpoint: float | None = None, *,
                       include_angular_wall: bool = True,
                       gap_radius: float = 1.0,
                       ) -> tuple[ObstacleSet, EndpointPair]:
    """Assemble walls and snap the perturbed start/end nodes.

    The endpoints are chosen from the 3x3x3 node neighborhood of the source:
    among the nodes strictly on the required side of both walls, the one
    closest to the eps-perturbed source wins.
    """
    z = np.array(ann.z if ann.z is not None else auto_z(ann), dtype=float)
    errors = validate(ann, (z[0], z[1]), spec)
    if errors:
        raise errors[0]

    p = np.array(ann.source_xy, dtype=float)
    theta_p = reduce_angle(ann.source_theta)
    ray_dir = p - z
    ray_dir = ray_dir / float(np.hypot(*ray_dir))

    segments: list[Segment] = [
        Segment((z[0], z[1]), tuple(_ray_box_exit(z, ray_dir, spec))),
    ]

    scribble_bodies = list(ann.fg_scribbles) + list(ann.bg_scribbles)
    for s in ann.fg_scribbles:
        xf = np.asarray(s, dtype=float).reshape(-1, 2)[0]
        segments.append(Segment((z[0], z[1]), (xf[0], xf[1])))
    for s in ann.bg_scribbles:
        xb = np.asarray(s, dtype=float).reshape(-1, 2)[0]
        d = xb - z
        norm = float(np.hypot(*d))
        if norm < 1e-9:
            raise ValidationError("background scribble starts at z",
                                  "annotation.scribble.at_z")
        q = _ray_box_exit(xb, d / norm, spec)
        segments.append(Segment((xb[0], xb[1]), tuple(q)))

    for lm in ann.landmarks:
        xk = np.array(lm, dtype=float)
        d = xk - z
        norm = float(np.hypot(*d))
        if norm < 1e-9:
            raise ValidationError("landmark coincides with z",
                                  "annotation.landmark.at_z")
        if float(np.hypot(*(xk - p))) <= gap_radius:
            raise ValidationError("landmark coincides with the source point",
                                  "annotation.landmark.at_source")
        d = d / norm
        outer_end = _ray_box_exit(xk, d, spec)
        inner = Segment((z[0], z[1]), (xk[0], xk[1]), open2=True)
        outer = Segment((xk[0], xk[1]), tuple(outer_end), open1=True)
        segments.extend([inner, outer])

    mask = rasterize_scribbles(scribble_bodies, spec) if scribble_bodies else None

    obstacles = ObstacleSet(
        physical_segments=tuple(segments),
        angular_wall=theta_p if include_angular_wall else None,
        blocked_mask=mask,
        gap_radius=gap_radius)

    # landmark walls must not sever the source's neighborhood
    eff = obstacles.effective_segments()
    for row in eff[1:]:
        if _point_segment_distance(p, row[:2], row[2:]) < 0.5 * spec.hx:
            raise ValidationError(
                "an annotation wall passes through the source point",
                "annotation.landmark.severs_source")

    endpoints = _snap_endpoints(p, theta_p, z, spec, obstacles, eps_endpoint)
    return obstacles, endpoints


def _snap_endpoints(p: np.ndarray, theta_p: float, z: np.ndarray,
                    spec: GridSpec, obstacles: ObstacleSet,
                    eps_endpoint: float | None) -> EndpointPair:
    eps = eps_endpoint if eps_endpoint is not None else max(spec.hx, spec.htheta)
    n = np.array([math.cos(theta_p), math.sin(theta_p)])
    ray = p - z
    allowed = node_allowed(spec, obstacles)

    bx = int(round(p[0] / spec.hx))
    by = int(round(p[1] / spec.hx))
    bt = spec.nearest_level(theta_p)

    picks = []
    for sign in (+1.0, -1.0):
        target_xy = p + sign * eps * n
        target_th = theta_p + sign * eps
        best = None
        best_d = math.inf
        for dt in (-1, 0, 1):
            it = (bt + dt) % spec.ntheta
            th = spec.theta_of_level(it)
            dth = angular_difference(th, theta_p)
            if dth * sign <= _WALL_TOL:
                continue
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    ix, iy = bx + dx, by + dy
                    if not (0 <= ix < spec.nx and 0 <= iy < spec.ny):
                        continue
                    node_xy = np.array([ix * spec.hx, iy * spec.hx])
                    side = ray[0] * (node_xy[1] - z[1]) - ray[1] * (node_xy[0] - z[0])
                    if side * sign <= _WALL_TOL:
                        continue
                    if not allowed[it, iy, ix]:
                        continue
                    d = (((node_xy[0] - target_xy[0]) / spec.hx) ** 2
                         + ((node_xy[1] - target_xy[1]) / spec.hx) ** 2
                         + (angular_difference(th, reduce_angle(target_th))
                            / spec.htheta) ** 2)
                    if d < best_d:
                        best_d = d
                        best = (ix, iy, it)
        if best is None:
            raise ConfigurationError(
                "could not place the perturbed endpoints next to the source; "
                "increase the angular resolution (ntheta)",
                "solver.endpoints")
        picks.append(best)
    return EndpointPair(p0=picks[0], p1=picks[1])


# ---------------------------------------------------------------------------
# blocking predicates


def _sweep_crosses_wall(theta_a: float, sweep: float, wall: float) -> bool:
    """Does the continuous rotation from theta_a by ``sweep`` cross the wall?

    Endpoints sitting exactly on the wall count as crossings.
    """
    if abs(angular_difference(theta_a, wall)) < _WALL_TOL:
        return True
    if abs(angular_difference(theta_a + sweep, wall)) < _WALL_TOL:
        return True
    if sweep == 0.0:
        return False
    lo, hi = (theta_a, theta_a + sweep) if sweep > 0 else (theta_a + sweep, theta_a)
    k0 = math.ceil((lo - wall) / (2 * math.pi))
    k1 = math.floor((hi - wall) / (2 * math.pi))
    for k in range(k0, k1 + 1):
        w = wall + 2 * math.pi * k
        if lo + _WALL_TOL < w < hi - _WALL_TOL:
            return True
    return False


def node_allowed(spec: GridSpec, obstacles: ObstacleSet) -> np.ndarray:
    """(ntheta, ny, nx) usability mask from blocked pixels and wall levels."""
    ok = np.ones(spec.shape, dtype=bool)
    if obstacles.blocked_mask is not None:
        ok &= ~obstacles.blocked_mask[None, :, :]
    if obstacles.angular_wall is not None:
        for t in range(spec.ntheta):
            if abs(angular_difference(spec.theta_of_level(t),
                                      obstacles.angular_wall)) < _WALL_TOL:
                ok[t] = False
    return ok


def _segments_cross_grid(spec: GridSpec, e1: int, e2: int,
                         seg: np.ndarray) -> np.ndarray:
    """Vectorized: does the edge from node (ix, iy) to node (ix-e1, iy-e2)
    intersect the obstacle segment ``seg``?  Touching counts as blocked."""
    ax, ay, bx, by = seg
    X, Y = np.meshgrid(np.arange(spec.nx) * spec.hx,
                       np.arange(spec.ny) * spec.hx)
    Qx = X - e1 * spec.hx
    Qy = Y - e2 * spec.hx
    rx, ry = bx - ax, by - ay
    d1 = rx * (Y - ay) - ry * (X - ax)
    d2 = rx * (Qy - ay) - ry * (Qx - ax)
    sx = Qx - X
    sy = Qy - Y
    d3 = sx * (ay - Y) - sy * (ax - X)
    d4 = sx * (by - Y) - sy * (bx - X)
    proper = (np.sign(d1) * np.sign(d2) < 0) & (np.sign(d3) * np.sign(d4) < 0)

    def onseg(px, py, x1, y1, x2, y2):
        return ((np.minimum(x1, x2) - 1e-12 <= px) & (px <= np.maximum(x1, x2) + 1e-12)
                & (np.minimum(y1, y2) - 1e-12 <= py) & (py <= np.maximum(y1, y2) + 1e-12))

    touch = ((d1 == 0) & onseg(X, Y, ax, ay, bx, by)
             | (d2 == 0) & onseg(Qx, Qy, ax, ay, bx, by)
             | (d3 == 0) & onseg(ax, ay, X, Y, Qx, Qy)
             | (d4 == 0) & onseg(bx, by, X, Y, Qx, Qy))
    return proper | touch


_allowance_cache: dict[bytes, tuple] = {}


def _allowance_key(spec: GridSpec, off: np.ndarray,
                   obstacles: ObstacleSet) -> bytes:
    import hashlib

    h = hashlib.sha1()
    h.update(repr((spec.nx, spec.ny, spec.ntheta, spec.hx,
                   obstacles.angular_wall, obstacles.gap_radius)).encode())
    h.update(off.tobytes())
    h.update(obstacles.effective_segments().tobytes())
    if obstacles.blocked_mask is not None:
        h.update(np.packbits(obstacles.blocked_mask).tobytes())
    return h.digest()


def edge_allowance(spec: GridSpec, off: np.ndarray, w: np.ndarray,
                   obstacles: ObstacleSet):
    """Precompute per-term edge usability for the solver kernel.

    Returns (pid, planar_ok, ang_ok): ``pid[t, i]`` indexes the planar map of
    the term's (e1, e2) displacement; ``planar_ok[pid, iy, ix]`` says whether
    the edge leaving node (ix, iy) is free of planar walls and blocked pixels;
    ``ang_ok[t, i]`` says whether the term's angular sweep avoids the wall.
    Results are memoized on the input content; one solve-and-backtrack pass
    reuses a single computation.
    """
    key = _allowance_key(spec, off, obstacles)
    hit = _allowance_cache.get(key)
    if hit is not None:
        return hit
    nt, imax = w.shape
    segs = obstacles.effective_segments()
    mask = obstacles.blocked_mask

    planar_ids: dict[tuple[int, int], int] = {}
    maps: list[np.ndarray] = []
    pid = np.zeros((nt, imax), dtype=np.int32)
    for t in range(nt):
        for i in range(imax):
            key = (int(off[t, i, 0]), int(off[t, i, 1]))
            if key not in planar_ids:
                planar_ids[key] = len(maps)
                maps.append(_planar_map(spec, key[0], key[1], segs, mask))
            pid[t, i] = planar_ids[key]
    planar_ok = np.stack(maps) if maps else np.ones((1, 1, 1), dtype=np.uint8)

    ang_ok = np.ones((nt, imax), dtype=np.uint8)
    if obstacles.angular_wall is not None:
        for t in range(nt):
            theta_a = spec.theta_of_level(t)
            for i in range(imax):
                sweep = -int(off[t, i, 2]) * spec.htheta
                if _sweep_crosses_wall(theta_a, sweep, obstacles.angular_wall):
                    ang_ok[t, i] = 0
    if len(_allowance_cache) > 8:
        _allowance_cache.clear()
    _allowance_cache[key] = (pid, planar_ok, ang_ok)
    return pid, planar_ok, ang_ok


def _planar_map(spec: GridSpec, e1: int, e2: int,
                segs: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    ok = np.ones((spec.ny, spec.nx), dtype=bool)
    if e1 == 0 and e2 == 0:
        return ok.astype(np.uint8)
    for seg in segs:
        ok &= ~_segments_cross_grid(spec, e1, e2, seg)
    if mask is not None:
        X, Y = np.meshgrid(np.arange(spec.nx, dtype=float),
                           np.arange(spec.ny, dtype=float))
        mx = np.clip(np.rint(X - 0.5 * e1).astype(int), 0, spec.nx - 1)
        my = np.clip(np.rint(Y - 0.5 * e2).astype(int), 0, spec.ny - 1)
        ok &= ~mask[my, mx]
    return ok.astype(np.uint8)


def edge_blocked(a: LiftedPoint, b: LiftedPoint, obstacles: ObstacleSet,
                 hx: float = 1.0) -> bool:
    """Scalar blocking predicate for one lifted edge [a, b]."""
    if obstacles.angular_wall is not None:
        sweep = angular_difference(b.theta, a.theta)
        if _sweep_crosses_wall(a.theta, sweep, obstacles.angular_wall):
            return True
    pa = np.array([a.x, a.y])
    pb = np.array([b.x, b.y])
    for seg in obstacles.effective_segments():
        if _segment_pair_intersect(pa, pb, seg[:2], seg[2:]):
            return True
    if obstacles.blocked_mask is not None:
        ny, nx = obstacles.blocked_mask.shape
        for q in (pa, pb, 0.5 * (pa + pb)):
            ix = min(max(int(round(q[0] / hx)), 0), nx - 1)
            iy = min(max(int(round(q[1] / hx)), 0), ny - 1)
            if obstacles.blocked_mask[iy, ix]:
                return True
    return False


def _segment_pair_intersect(p1, p2, q1, q2) -> bool:
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 \
            and d3 != 0 and d4 != 0:
        return True

    def onseg(r, s1, s2):
        return (min(s1[0], s2[0]) - 1e-12 <= r[0] <= max(s1[0], s2[0]) + 1e-12
                and min(s1[1], s2[1]) - 1e-12 <= r[1] <= max(s1[1], s2[1]) + 1e-12)

    if d1 == 0 and onseg(p1, q1, q2):
        return True
    if d2 == 0 and onseg(p2, q1, q2):
        return True
    if d3 == 0 and onseg(q1, p1, p2):
        return True
    if d4 == 0 and onseg(q2, p1, p2):
        return True
    return False
