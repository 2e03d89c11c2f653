"""Active-geodesic contour evolution.

The first contour comes from edge features alone, solved over the whole
image.  Each following iteration restricts the search to a tubular band
around the previous contour, refits the region appearance, solves the
curl problem for the drift field, rebuilds the velocity, and extracts a new
closed geodesic.  The loop stops when the mean contour displacement falls
under the tolerance or the iteration budget runs out.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import appearance, randers
from .constraints import Annotation, ObstacleSet, auto_z, build_search_space
from .eikonal import solve
from .errors import GeokonvexError, SolverError
from .geodesic import (ClosedContour, GeodesicPath, backtrack,
                       close_and_diagnose, rasterize_contour)
from .grid import GridSpec
from .models import ModelKind, ModelParams, build_stencil_cache


@dataclass
class EvolutionConfig:
    model: ModelKind
    params: ModelParams = field(default_factory=ModelParams)
    ntheta: int = 60
    alpha: float = 3.0
    mu: float = 0.1
    tube_radius: float = 10.0
    max_iters: int = 10
    convergence_tol: float = 0.5
    appearance: str = "gmm"            # "gmm" | "pc"
    gmm_components: int = 5
    freeze_appearance: bool = False
    edge_sigma: float = 2.0
    edge_lambda: float = 100.0
    edge_alpha: float = 1.0
    step: float | None = None          # backtracking step (pixels)

    def __post_init__(self):
        if min(self.alpha, self.tube_radius, self.max_iters,
               self.convergence_tol) <= 0:
            raise ValueError("evolution parameters must be positive")


@dataclass
class IterationRecord:
    index: int
    contour: ClosedContour
    path: GeodesicPath
    arrival_value: float
    displacement: float
    degraded: bool = False


@dataclass
class EvolutionTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    degraded: bool = False
    wall_time: float = 0.0


def _grid_for(image: np.ndarray, cfg: EvolutionConfig) -> GridSpec:
    ny, nx = image.shape[:2]
    return GridSpec(nx=nx, ny=ny, ntheta=cfg.ntheta)


def _closed_geodesic(spec, stencils, velocity, obstacles, endpoints,
                     p, z, step, convex: bool,
                     ) -> tuple[ClosedContour, GeodesicPath, float]:
    dist, report = solve(spec, stencils, velocity, obstacles,
                         seed=endpoints.p0, target=endpoints.p1)
    arrival = float(dist.values[endpoints.p1[2], endpoints.p1[1],
                                endpoints.p1[0]])
    if not math.isfinite(arrival):
        raise SolverError("the arrival point is unreachable",
                          "unreachable_target")
    path = backtrack(dist, stencils, endpoints.p1, endpoints.p0,
                     obstacles=obstacles, step=step,
                     blocked_planar=velocity.blocked,
                     forward_turn_only=convex)
    contour = close_and_diagnose(path, p, z, spec.hx, convex_prior=convex)
    return contour, path, arrival


def _acceptable(contour: ClosedContour, model: ModelKind) -> bool:
    d = contour.diagnostics
    if not (d.is_simple and d.encloses_z):
        return False
    if model.convexity_constrained:
        return d.is_convex and abs(d.total_curvature - 2 * math.pi) <= 0.05
    return True


def _contour_samples(contour: ClosedContour, spacing: float = 1.0) -> np.ndarray:
    v = contour.vertices
    closed = np.concatenate([v, v[:1]], axis=0)
    out = []
    for a, b in zip(closed[:-1], closed[1:]):
        seg = np.hypot(*(b - a))
        n = max(1, int(seg / spacing))
        for t in range(n):
            out.append(a + (b - a) * (t / n))
    return np.array(out)


def mean_displacement(a: ClosedContour, b: ClosedContour) -> float:
    """Symmetric mean closest-point distance between two contours."""
    pa = _contour_samples(a)
    pb = _contour_samples(b)
    d_ab = cKDTree(pb).query(pa)[0].mean()
    d_ba = cKDTree(pa).query(pb)[0].mean()
    return float(0.5 * (d_ab + d_ba))


def _tube_mask(contour: ClosedContour, shape: tuple[int, int],
               radius: float) -> np.ndarray:
    on = np.zeros(shape, dtype=bool)
    pts = _contour_samples(contour, spacing=0.5)
    xs = np.clip(np.rint(pts[:, 0]).astype(int), 0, shape[1] - 1)
    ys = np.clip(np.rint(pts[:, 1]).astype(int), 0, shape[0] - 1)
    on[ys, xs] = True
    dist = ndimage.distance_transform_edt(~on)
    return dist <= radius


def _bootstrap_samples(image, ann: Annotation, z, shape):
    """First-iteration appearance samples: scribbles when present, else a
    disc around z against an image border band."""
    chan = image if image.ndim == 3 else image[:, :, None]
    ny, nx = shape
    if ann.fg_scribbles:
        from .constraints import rasterize_scribbles
        spec = GridSpec(nx=nx, ny=ny, ntheta=4)
        fg = rasterize_scribbles(list(ann.fg_scribbles), spec)
        if ann.bg_scribbles:
            bg = rasterize_scribbles(list(ann.bg_scribbles), spec)
        else:
            bg = np.zeros(shape, dtype=bool)
            bg[:3, :] = bg[-3:, :] = True
            bg[:, :3] = bg[:, -3:] = True
        return chan[fg].reshape(-1, chan.shape[2]), chan[bg].reshape(-1, chan.shape[2])
    yy, xx = np.mgrid[0:ny, 0:nx]
    disc = (xx - z[0]) ** 2 + (yy - z[1]) ** 2 <= 8.0 ** 2
    border = np.zeros(shape, dtype=bool)
    border[:3, :] = border[-3:, :] = True
    border[:, :3] = border[:, -3:] = True
    return chan[disc].reshape(-1, chan.shape[2]), chan[border].reshape(-1, chan.shape[2])


def _potentials_from_samples(image, inside_samples, outside_samples, cfg):
    if cfg.appearance == "pc":
        c1 = inside_samples.mean(axis=0)
        c2 = outside_samples.mean(axis=0)
        chan = image if image.ndim == 3 else image[:, :, None]
        return appearance.PotentialMaps(
            xi1=np.sum((chan - c1) ** 2, axis=2),
            xi2=np.sum((chan - c2) ** 2, axis=2))
    m1 = appearance.fit_gmm(inside_samples, cfg.gmm_components, seed=0)
    m2 = appearance.fit_gmm(outside_samples, cfg.gmm_components, seed=1)
    return appearance.PotentialMaps(xi1=appearance.eval_xi(m1, image),
                                    xi2=appearance.eval_xi(m2, image))


def initial_contour(image: np.ndarray, ann: Annotation, cfg: EvolutionConfig,
                    ) -> tuple[ClosedContour, GeodesicPath, float]:
    """Edge-only closed geodesic over the full image, all walls active."""
    spec = _grid_for(image, cfg)
    if ann.z is None:
        ann = Annotation(ann.source_xy, ann.source_theta, auto_z(ann),
                         ann.fg_scribbles, ann.bg_scribbles, ann.landmarks)
    obstacles, endpoints = build_search_space(
        ann, spec, include_angular_wall=cfg.model.convexity_constrained)
    tensors = randers.edge_tensor(image, cfg.edge_sigma, cfg.edge_lambda)
    velocity = randers.build_edge_velocity(tensors, spec, cfg.edge_alpha)
    stencils = build_stencil_cache(cfg.model, cfg.params, spec)
    return _closed_geodesic(spec, stencils, velocity, obstacles, endpoints,
                            np.array(ann.source_xy), np.array(ann.z),
                            cfg.step, cfg.model.convexity_constrained)


def evolve(image: np.ndarray, ann: Annotation, cfg: EvolutionConfig,
           on_iteration=None) -> tuple[ClosedContour, EvolutionTrace]:
    """Run the full evolution; on iteration failure the last good contour is
    returned with the trace marked degraded.  ``on_iteration`` (if given) is
    called with each IterationRecord as it is produced."""
    t0 = time.perf_counter()
    spec = _grid_for(image, cfg)
    if ann.z is None:
        ann = Annotation(ann.source_xy, ann.source_theta, auto_z(ann),
                         ann.fg_scribbles, ann.bg_scribbles, ann.landmarks)
    z = np.array(ann.z)
    p = np.array(ann.source_xy)
    obstacles, endpoints = build_search_space(
        ann, spec, include_angular_wall=cfg.model.convexity_constrained)
    tensors = randers.edge_tensor(image, cfg.edge_sigma, cfg.edge_lambda)
    stencils = build_stencil_cache(cfg.model, cfg.params, spec)

    trace = EvolutionTrace()
    contour, path, arrival = initial_contour(image, ann, cfg)
    first = IterationRecord(
        index=0, contour=contour, path=path, arrival_value=arrival,
        displacement=math.inf,
        degraded=not _acceptable(contour, cfg.model))
    trace.iterations.append(first)
    if on_iteration is not None:
        on_iteration(first)

    frozen_potentials = None
    for j in range(1, cfg.max_iters + 1):
        prev = trace.iterations[-1].contour
        tube = _tube_mask(prev, (spec.ny, spec.nx), cfg.tube_radius)
        try:
            if frozen_potentials is not None:
                pots = frozen_potentials
            elif j == 1:
                ins, outs = _bootstrap_samples(image, ann, z,
                                               (spec.ny, spec.nx))
                pots = _potentials_from_samples(image, ins, outs, cfg)
            else:
                inside = rasterize_contour(prev, (spec.ny, spec.nx), spec.hx)
                pots = appearance.region_potentials(
                    image, inside, kind=cfg.appearance,
                    n_components=cfg.gmm_components)
            if cfg.freeze_appearance and frozen_potentials is None:
                frozen_potentials = pots
            drift = randers.solve_curl((pots.xi1 - pots.xi2) * tube, tube)
            velocity = randers.build_velocity(tensors, drift, tube,
                                              cfg.alpha, cfg.mu, spec)
            iter_obstacles = obstacles.with_extra_mask(~tube)
            contour, path, arrival = _closed_geodesic(
                spec, stencils, velocity, iter_obstacles, endpoints, p, z,
                cfg.step, cfg.model.convexity_constrained)
        except GeokonvexError:
            trace.degraded = True
            break
        disp = mean_displacement(prev, contour)
        rec = IterationRecord(index=j, contour=contour, path=path,
                              arrival_value=arrival, displacement=disp,
                              degraded=not _acceptable(contour, cfg.model))
        if rec.degraded:
            trace.degraded = True
            break
        trace.iterations.append(rec)
        if on_iteration is not None:
            on_iteration(rec)
        if disp < cfg.convergence_tol:
            trace.converged = True
            break

    trace.wall_time = time.perf_counter() - t0
    final = trace.iterations[-1]
    return final.contour, trace
