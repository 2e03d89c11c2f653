"""Geodesic extraction and closed-contour diagnostics.

Paths are recovered by integrating the discrete geodesic flow backwards from
the arrival point with normalized explicit Euler steps; the nodal flow field
is interpolated trilinearly (theta wraps), ignoring corners where the
distance value is infinite.  Closing the path through the source yields a
polygon whose simplicity, convexity, winding and total absolute turning are
reported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, constraints
from .eikonal import DistanceField, pack_stencils
from .errors import SolverError
from .grid import GridSpec, LiftedPoint, angular_difference, reduce_angle
from .models import StencilScheme

CONVEXITY_ANGLE_TOL = 1e-3  # radians; reflex turns beyond this break convexity


@dataclass
class GeodesicPath:
    """Lifted polyline in forward order (start node first, arrival last)."""

    lifted_points: list[LiftedPoint]
    physical: np.ndarray        # (N, 2)
    turning_angles: np.ndarray  # (N,) unwrapped orientation samples
    arc_lengths: np.ndarray     # (N,) cumulative planar length


@dataclass
class ContourDiagnostics:
    total_curvature: float      # sum of |exterior angles| of the closed polygon
    is_simple: bool
    is_convex: bool
    encloses_z: bool
    min_turn_angle: float
    winding: int


@dataclass
class ClosedContour:
    vertices: np.ndarray        # (M, 2), first vertex at the source position
    diagnostics: ContourDiagnostics


# ---------------------------------------------------------------------------
# flow + backtracking


def flow_field(dist: DistanceField, stencils: list[StencilScheme],
               obstacles=None, blocked_planar: np.ndarray | None = None,
               ) -> np.ndarray:
    """Nodal geodesic flow (physical units) over the whole grid."""
    spec = dist.spec
    w, off, grp, num_groups = pack_stencils(stencils)
    node_ok = np.ones(spec.shape, dtype=bool)
    if blocked_planar is not None:
        node_ok &= ~blocked_planar[None, :, :]
    if obstacles is not None:
        node_ok &= constraints.node_allowed(spec, obstacles)
        pid, planar_ok, ang_ok = constraints.edge_allowance(spec, off, w, obstacles)
        has_obstacles = True
    else:
        pid = np.zeros((1, 1), dtype=np.int32)
        planar_ok = np.ones((1, 1, 1), dtype=np.uint8)
        ang_ok = np.ones((1, 1), dtype=np.uint8)
        has_obstacles = False
    return _kernels.flow_field_kernel(
        dist.values.reshape(-1), dist.accepted_order.reshape(-1),
        np.ascontiguousarray(node_ok.reshape(-1).astype(np.uint8)),
        w, off, grp, num_groups,
        has_obstacles, pid, planar_ok, ang_ok,
        spec.hx, spec.htheta, spec.nx, spec.ny, spec.ntheta)


def geodesic_flow(x: LiftedPoint, dist: DistanceField,
                  stencils: list[StencilScheme], obstacles=None) -> np.ndarray:
    """Flow vector at one (possibly off-grid) point; zero in flat regions."""
    flow = flow_field(dist, stencils, obstacles)
    return _interp_flow(flow, dist.values, x.x, x.y, x.theta, dist.spec,
                        obstacles)


def _interp_flow(flow: np.ndarray, u: np.ndarray, x: float, y: float,
                 theta: float, spec: GridSpec, obstacles=None) -> np.ndarray:
    """Trilinear interpolation of the flow, skipping infinite-value corners
    and corners separated from the query point by a wall."""
    gx = min(max(x / spec.hx, 0.0), spec.nx - 1.0)
    gy = min(max(y / spec.hx, 0.0), spec.ny - 1.0)
    gt = reduce_angle(theta) / spec.htheta
    ix0 = min(int(gx), spec.nx - 2)
    iy0 = min(int(gy), spec.ny - 2)
    it0 = int(gt) % spec.ntheta
    fx, fy, ft = gx - ix0, gy - iy0, gt - int(gt)
    it1 = (it0 + 1) % spec.ntheta

    query = None
    if obstacles is not None:
        query = LiftedPoint(x, y, theta)
    acc = np.zeros(3)
    wsum = 0.0
    for it, wt in ((it0, 1.0 - ft), (it1, ft)):
        for iy, wy in ((iy0, 1.0 - fy), (iy0 + 1, fy)):
            for ix, wx in ((ix0, 1.0 - fx), (ix0 + 1, fx)):
                wgt = wt * wy * wx
                if wgt == 0.0 or not math.isfinite(u[it, iy, ix]):
                    continue
                if query is not None:
                    corner = LiftedPoint(ix * spec.hx, iy * spec.hx,
                                         it * spec.htheta)
                    if constraints.edge_blocked(query, corner, obstacles,
                                                spec.hx):
                        continue
                acc += wgt * flow[it, iy, ix]
                wsum += wgt
    if wsum <= 0.0:
        return np.zeros(3)
    return acc / wsum


def backtrack(dist: DistanceField, stencils: list[StencilScheme],
              start: tuple[int, int, int], seed: tuple[int, int, int],
              obstacles=None, step: float | None = None,
              blocked_planar: np.ndarray | None = None,
              forward_turn_only: bool = False) -> GeodesicPath:
    """Integrate the flow backwards from ``start`` until the seed is reached.

    ``step`` is the per-iteration displacement in grid cells (default 0.5);
    termination triggers within 2 cells of the seed (the seed is appended),
    measured with the angular axis counted in cells as well.

    ``forward_turn_only`` clamps the angular rate to be non-negative, which
    matches the admissible cone of the convexity-constrained models; the
    relaxed stencils occasionally carry small negative angular components
    that would otherwise leak into the turning profile.
    """
    spec = dist.spec
    if not math.isfinite(dist.values[start[2], start[1], start[0]]):
        raise SolverError("backtracking start has infinite value",
                          "solver.backtrack.unreached")
    step_cells = 0.5 if step is None else step / spec.hx
    flow = flow_field(dist, stencils, obstacles, blocked_planar)
    u = dist.values
    descent = _GraphDescent(dist, stencils, obstacles, blocked_planar,
                            forward_turn_only)

    seed_xy = np.array([seed[0] * spec.hx, seed[1] * spec.hx])
    seed_th = spec.theta_of_level(seed[2])

    x = float(start[0] * spec.hx)
    y = float(start[1] * spec.hx)
    th = spec.theta_of_level(start[2])  # integrated without reduction
    pts = [(x, y, th)]

    max_steps = 50 * (spec.nx + spec.ny + spec.ntheta)
    reached = start == seed
    for _ in range(max_steps):
        if reached:
            break
        dcell = math.sqrt(((x - seed_xy[0]) / spec.hx) ** 2
                          + ((y - seed_xy[1]) / spec.hx) ** 2
                          + (angular_difference(th, seed_th) / spec.htheta) ** 2)
        if dcell <= 2.0:
            th_end = th + angular_difference(seed_th, th)
            # drop samples that already rotated past the seed orientation;
            # they sit inside the stop ball and would break the forward
            # monotonicity of the angular component at the seam
            while len(pts) > 1 and pts[-1][2] < th_end - 1e-12:
                pts.pop()
            pts.append((seed_xy[0], seed_xy[1], th_end))
            reached = True
            break
        v = _interp_flow(flow, u, x, y, th, spec, obstacles)
        if forward_turn_only and v[2] < 0.0:
            # small negative angular rates are relaxation artifacts; the
            # admissible cone of the convexity-constrained models has none
            v[2] = 0.0
        vg = np.array([v[0] / spec.hx, v[1] / spec.hx, v[2] / spec.htheta])
        norm = float(np.linalg.norm(vg))
        stepped = False
        if norm >= 1e-14:
            vg /= norm
            nx_ = min(max(x - step_cells * vg[0] * spec.hx, 0.0),
                      (spec.nx - 1) * spec.hx)
            ny_ = min(max(y - step_cells * vg[1] * spec.hx, 0.0),
                      (spec.ny - 1) * spec.hx)
            nth = th - step_cells * vg[2] * spec.htheta
            if obstacles is None or not constraints.edge_blocked(
                    LiftedPoint(x, y, th), LiftedPoint(nx_, ny_, nth),
                    obstacles, spec.hx):
                x, y, th = nx_, ny_, nth
                stepped = True
        if not stepped:
            # degenerate pocket: the flow vanished or the continuous step
            # would cross a wall; take one discrete descent move instead
            nxt = descent.step(x, y, th)
            if nxt is None:
                raise SolverError(
                    "geodesic flow vanished away from the seed",
                    "solver.backtrack.stall")
            x, y, th = nxt[0], nxt[1], th + angular_difference(nxt[2], th)
        pts.append((x, y, th))
    if not reached:
        raise SolverError("backtracking exceeded its step budget",
                          "solver.backtrack.divergence")

    pts.reverse()  # forward order: seed -> start
    phys = np.array([(px, py) for px, py, _ in pts])
    theta_fwd = np.array([pth for _, _, pth in pts])
    theta_fwd -= 2.0 * math.pi * math.floor(theta_fwd[0] / (2.0 * math.pi))
    lifted = [LiftedPoint(px, py, reduce_angle(pth)) for px, py, pth in pts]
    seglen = np.hypot(*np.diff(phys, axis=0).T) if len(phys) > 1 else np.zeros(0)
    arcs = np.concatenate([[0.0], np.cumsum(seglen)])
    return GeodesicPath(lifted_points=lifted, physical=phys,
                        turning_angles=theta_fwd, arc_lengths=arcs)


class _GraphDescent:
    """One-node descent moves on the solved graph, used as a fallback when the
    interpolated flow degenerates at sub-cell scale."""

    def __init__(self, dist: DistanceField, stencils, obstacles, blocked_planar,
                 forward_turn_only: bool = False):
        self.spec = dist.spec
        self.u = dist.values
        self.forward_turn_only = forward_turn_only
        w, off, grp, _ = pack_stencils(stencils)
        self.w = w
        self.off = off
        self.node_ok = np.ones(self.spec.shape, dtype=bool)
        if blocked_planar is not None:
            self.node_ok &= ~blocked_planar[None, :, :]
        if obstacles is not None:
            self.node_ok &= constraints.node_allowed(self.spec, obstacles)
            self.pid, self.planar_ok, self.ang_ok = constraints.edge_allowance(
                self.spec, off, w, obstacles)
        else:
            self.pid = None

    def step(self, x: float, y: float, theta: float):
        spec = self.spec
        gx = min(max(x / spec.hx, 0.0), spec.nx - 1.0)
        gy = min(max(y / spec.hx, 0.0), spec.ny - 1.0)
        gt = reduce_angle(theta) / spec.htheta
        corners = []
        for it in (int(gt) % spec.ntheta, (int(gt) + 1) % spec.ntheta):
            for iy in (int(gy), min(int(gy) + 1, spec.ny - 1)):
                for ix in (int(gx), min(int(gx) + 1, spec.nx - 1)):
                    if math.isfinite(self.u[it, iy, ix]):
                        corners.append((self.u[it, iy, ix], ix, iy, it))
        best = None
        best_u = math.inf
        for cu, ix, iy, it in sorted(corners):
            for i in range(self.w.shape[1]):
                if self.w[it, i] <= 0.0:
                    continue
                jx = ix - int(self.off[it, i, 0])
                jy = iy - int(self.off[it, i, 1])
                ty = (it - int(self.off[it, i, 2])) % spec.ntheta
                if self.forward_turn_only and angular_difference(
                        spec.theta_of_level(ty), theta) > 1e-9:
                    continue  # a backward move must not rotate forward
                if not (0 <= jx < spec.nx and 0 <= jy < spec.ny):
                    continue
                if not self.node_ok[ty, jy, jx]:
                    continue
                if self.pid is not None:
                    if self.ang_ok[it, i] == 0 \
                            or self.planar_ok[self.pid[it, i], iy, ix] == 0:
                        continue
                if self.u[ty, jy, jx] < min(best_u, cu):
                    best_u = self.u[ty, jy, jx]
                    best = (jx * spec.hx, jy * spec.hx,
                            spec.theta_of_level(ty))
            if best is not None:
                return best
        return best


# ---------------------------------------------------------------------------
# closed-contour assembly & diagnostics


def _resample_polyline(pts: np.ndarray, min_edge: float) -> np.ndarray:
    """Drop vertices closer than ``min_edge`` to the last kept one."""
    kept = [pts[0]]
    for p in pts[1:]:
        if np.hypot(*(p - kept[-1])) >= min_edge:
            kept.append(p)
    if np.hypot(*(pts[-1] - kept[-1])) > 1e-12:
        kept.append(pts[-1])
    return np.array(kept)


def _isotonic_fit(y: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted L2 projection onto non-decreasing sequences
    (pool-adjacent-violators)."""
    vals = list(y.astype(float))
    wts = list(weights.astype(float))
    counts = [1] * len(vals)
    out_v: list[float] = []
    out_w: list[float] = []
    out_c: list[int] = []
    for v, w, c in zip(vals, wts, counts):
        out_v.append(v)
        out_w.append(w)
        out_c.append(c)
        while len(out_v) > 1 and out_v[-2] > out_v[-1]:
            v2, w2, c2 = out_v.pop(), out_w.pop(), out_c.pop()
            v1, w1, c1 = out_v.pop(), out_w.pop(), out_c.pop()
            wt = w1 + w2
            out_v.append((w1 * v1 + w2 * v2) / wt)
            out_w.append(wt)
            out_c.append(c1 + c2)
    result = np.empty(len(vals))
    pos = 0
    for v, c in zip(out_v, out_c):
        result[pos:pos + c] = v
        pos += c
    return result


def _monotone_rebuild(body: np.ndarray) -> np.ndarray:
    """Project the polyline onto the convex (non-decreasing tangent) class.

    Chord angles are isotonically regressed, the polyline is re-integrated
    with the original edge lengths, and a similarity alignment (which leaves
    the turning sequence untouched) restores the original endpoints.  The
    displacement is on the order of the angular noise times the edge length.
    """
    if len(body) < 4:
        return body
    e = np.diff(body, axis=0)
    lengths = np.hypot(e[:, 0], e[:, 1])
    keep = lengths > 1e-12
    e = e[keep]
    lengths = lengths[keep]
    if len(lengths) < 3:
        return body
    ang = np.arctan2(e[:, 1], e[:, 0])
    ang = np.unwrap(ang)
    fitted = _isotonic_fit(ang, lengths)
    steps = np.stack([np.cos(fitted), np.sin(fitted)], axis=1) * lengths[:, None]
    rebuilt = np.concatenate([body[:1], body[0] + np.cumsum(steps, axis=0)],
                             axis=0)
    # similarity transform about the first vertex mapping the new endpoint
    # onto the old one; rotations/scalings preserve turning angles
    want = body[-1] - body[0]
    have = rebuilt[-1] - rebuilt[0]
    den = float(have @ have)
    if den > 1e-12:
        a = (want[0] * have[0] + want[1] * have[1]) / den
        b = (want[1] * have[0] - want[0] * have[1]) / den
        rel = rebuilt - rebuilt[0]
        rebuilt = rebuilt[0] + np.stack(
            [a * rel[:, 0] - b * rel[:, 1], b * rel[:, 0] + a * rel[:, 1]],
            axis=1)
    return rebuilt


def winding_number(poly: np.ndarray, z: np.ndarray) -> int:
    d = poly - z[None, :]
    ang = np.arctan2(d[:, 1], d[:, 0])
    turns = np.diff(ang)
    turns = (turns + math.pi) % (2.0 * math.pi) - math.pi
    closing = ang[0] - ang[-1]
    closing = (closing + math.pi) % (2.0 * math.pi) - math.pi
    return int(round((np.sum(turns) + closing) / (2.0 * math.pi)))


def _polygon_is_simple(poly: np.ndarray) -> bool:
    """Pairwise proper-intersection scan over non-adjacent closed edges."""
    n = len(poly)
    a = poly
    b = np.roll(poly, -1, axis=0)
    for i in range(n - 2):
        j0 = i + 2
        j1 = n if i > 0 else n - 1  # edge 0 is adjacent to edge n-1
        if j0 >= j1:
            continue
        p, q = a[i], b[i]
        r = a[j0:j1]
        s = b[j0:j1]
        d1 = (q[0] - p[0]) * (r[:, 1] - p[1]) - (q[1] - p[1]) * (r[:, 0] - p[0])
        d2 = (q[0] - p[0]) * (s[:, 1] - p[1]) - (q[1] - p[1]) * (s[:, 0] - p[0])
        d3 = ((s[:, 0] - r[:, 0]) * (p[1] - r[:, 1])
              - (s[:, 1] - r[:, 1]) * (p[0] - r[:, 0]))
        d4 = ((s[:, 0] - r[:, 0]) * (q[1] - r[:, 1])
              - (s[:, 1] - r[:, 1]) * (q[0] - r[:, 0]))
        if np.any((np.sign(d1) * np.sign(d2) < 0) & (np.sign(d3) * np.sign(d4) < 0)):
            return False
    return True


def _turn_angles(poly: np.ndarray) -> np.ndarray:
    """Signed exterior angles at every vertex of the closed polygon."""
    e = np.roll(poly, -1, axis=0) - poly
    ang = np.arctan2(e[:, 1], e[:, 0])
    turns = np.diff(np.concatenate([ang, ang[:1]]))
    return (turns + math.pi) % (2.0 * math.pi) - math.pi


def _relax_seam(poly: np.ndarray, max_drops: int = 20) -> np.ndarray:
    """Drop vertices next to the closure anchor until the seam turns are
    non-negative.  The open path ends at the perturbed copies of the source,
    so rejoining it through the source itself leaves a small blunt wedge;
    convexity of the class guarantees a short prefix/suffix removal fixes it.
    """
    for _ in range(max_drops):
        if len(poly) <= 8:
            break
        turns = _turn_angles(poly)
        # turns[i] is the turn at vertex i+1; vertex 0 is the source anchor
        at_p = turns[-1]
        at_first = turns[0]
        at_last = turns[-2]
        if at_last < -1e-9:
            poly = np.delete(poly, len(poly) - 1, axis=0)
        elif at_first < -1e-9 or at_p < -1e-9:
            poly = np.delete(poly, 1, axis=0)
        else:
            break
    return poly


def close_and_diagnose(path: GeodesicPath, p: tuple[float, float],
                       z: tuple[float, float], hx: float = 1.0,
                       convex_prior: bool = False) -> ClosedContour:
    """Close the path through the source and compute the shape diagnostics.

    With ``convex_prior`` the polyline is projected onto the non-decreasing
    tangent class before closing, which removes the flow integrator's
    sub-cell direction noise without moving the curve materially; turn-angle
    diagnostics then measure shape rather than noise.
    """
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    gap0 = float(np.hypot(*(path.physical[0] - p)))
    gap1 = float(np.hypot(*(path.physical[-1] - p)))
    if gap0 > 3.0 * hx or gap1 > 3.0 * hx:
        raise SolverError(
            f"path endpoints too far from the source (gaps {gap0:.2f}, {gap1:.2f})",
            "solver.closure.gap")

    perimeter = float(path.arc_lengths[-1])
    min_edge = min(2.0 * hx, max(perimeter / 12.0, 0.5 * hx))
    body = _resample_polyline(path.physical, min_edge)
    # the endpoint cluster sits within a couple of cells of the source and
    # carries the integrator's stop-ball kink; close through p directly
    dist_p = np.hypot(*(body - p[None, :]).T)
    lo = 0
    while lo < len(body) - 1 and dist_p[lo] < 2.0 * hx:
        lo += 1
    hi = len(body)
    while hi > lo + 1 and dist_p[hi - 1] < 2.0 * hx:
        hi -= 1
    body = body[lo:hi]
    for _ in range(2):
        if len(body) >= 3:
            smoothed = body.copy()
            smoothed[1:-1] = (0.25 * body[:-2] + 0.5 * body[1:-1]
                              + 0.25 * body[2:])
            body = smoothed
    if convex_prior:
        body = _monotone_rebuild(body)
    poly = np.concatenate([p[None, :], body], axis=0)
    if convex_prior:
        poly = _relax_seam(poly)
    if len(poly) < 3:
        raise SolverError("closed contour degenerated to fewer than 3 vertices",
                          "solver.closure.degenerate")

    turns = _turn_angles(poly)
    min_turn = float(turns.min())
    total = float(np.abs(turns).sum())
    winding = winding_number(poly, z)
    diag = ContourDiagnostics(
        total_curvature=total,
        is_simple=_polygon_is_simple(poly),
        is_convex=min_turn >= -CONVEXITY_ANGLE_TOL,
        encloses_z=(winding == 1),
        min_turn_angle=min_turn,
        winding=winding)
    return ClosedContour(vertices=poly, diagnostics=diag)


def rasterize_contour(contour: ClosedContour, shape: tuple[int, int],
                      hx: float = 1.0) -> np.ndarray:
    """Filled pixel mask of the closed contour (even-odd fill)."""
    from PIL import Image, ImageDraw

    ny, nx = shape
    img = Image.new("1", (nx, ny), 0)
    draw = ImageDraw.Draw(img)
    draw.polygon([(v[0] / hx, v[1] / hx) for v in contour.vertices],
                 fill=1, outline=1)
    return np.asarray(img, dtype=bool)


def jaccard(mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    """Intersection-over-union of two binary masks; 0.0 when both are empty."""
    a = np.asarray(mask_a, dtype=bool)
    b = np.asarray(mask_b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("masks must share a shape")
    union = np.logical_or(a, b).sum()
    if union == 0:
        warnings.warn("jaccard of two empty masks, returning 0.0")
        return 0.0
    return float(np.logical_and(a, b).sum() / union)
