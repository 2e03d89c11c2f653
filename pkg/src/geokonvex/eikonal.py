"""Single-pass fast-marching solver for the discretized geodesic system.

Each node's value solves the max-of-sums upwind equation

    max_k  sum_i  rho_ik * (u(x) - u(y_ik))_+^2  =  psi(x)^2

restricted to the obstacle-free graph: a neighbor value is +inf when the
offset exits the grid, when the edge is blocked by an obstacle, or when the
neighbor has not been accepted yet (strict fast-marching rule).  Nodes are
accepted in non-decreasing value order off a priority queue with ties broken
by linear grid index, so identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .grid import GridSpec
from .models import StencilScheme

INF = math.inf


@dataclass
class DistanceField:
    """Solution values with acceptance metadata; unreachable nodes hold +inf."""

    values: np.ndarray          # (ntheta, ny, nx) float64
    accepted_order: np.ndarray  # (ntheta, ny, nx) int64, -1 if never accepted
    seed: tuple[int, int, int]
    spec: GridSpec


@dataclass
class SolveReport:
    accepted_count: int
    stop_reason: str            # "target_reached" | "queue_exhausted"
    wall_time: float
    causality_ok: bool = True


def local_update(neighbor_values, weights, rhs: float) -> float:
    """Reference solve of the local equation; one sequence per group.

    ``neighbor_values[k][i]`` and ``weights[k][i]`` describe group k.  The
    returned value is the smallest group solution, which is where the max
    over groups first meets ``rhs``.  Degenerate inputs yield +inf.
    """
    if rhs <= 0.0:
        raise ValueError("rhs must be positive")
    best = INF
    for vals, ws in zip(neighbor_values, weights):
        pairs = sorted((float(v), float(w)) for v, w in zip(vals, ws)
                       if w > 0.0 and math.isfinite(v))
        if not pairs:
            continue
        a = b = c = 0.0
        for m, (v, w) in enumerate(pairs):
            a += w
            b += w * v
            c += w * v * v
            disc = max(b * b - a * (c - rhs), 0.0)
            cand = (b + math.sqrt(disc)) / a
            if m + 1 >= len(pairs) or cand <= pairs[m + 1][0]:
                break
        best = min(best, cand)
    return best


def pack_stencils(stencils: list[StencilScheme]):
    """Pad per-level stencils into rectangular arrays for the kernel."""
    nt = len(stencils)
    imax = max(len(s.weights) for s in stencils)
    w = np.zeros((nt, imax))
    off = np.zeros((nt, imax, 3), dtype=np.int64)
    grp = np.zeros((nt, imax), dtype=np.uint8)
    for t, s in enumerate(stencils):
        n = len(s.weights)
        w[t, :n] = s.weights
        off[t, :n] = s.offsets
        grp[t, :n] = s.groups
    num_groups = max(s.num_groups for s in stencils)
    return w, off, grp, num_groups


def reverse_adjacency(w: np.ndarray, off: np.ndarray, nt: int):
    """CSR table: for a node at level ty, the (dx, dy, tx) steps to every node
    whose stencil can reach it.  Offsets depend only on the level, so this is
    computed once per solve."""
    buckets: list[list[tuple[int, int, int]]] = [[] for _ in range(nt)]
    for tx in range(nt):
        seen = set()
        for i in range(w.shape[1]):
            if w[tx, i] <= 0.0:
                continue
            e1, e2, e3 = (int(off[tx, i, 0]), int(off[tx, i, 1]),
                          int(off[tx, i, 2]))
            key = (e1, e2, e3)
            if key in seen:
                continue
            seen.add(key)
            ty = (tx - e3) % nt
            buckets[ty].append((e1, e2, tx))
    ptr = np.zeros(nt + 1, dtype=np.int64)
    for t in range(nt):
        buckets[t].sort()
        ptr[t + 1] = ptr[t] + len(buckets[t])
    dat = np.zeros((int(ptr[-1]), 3), dtype=np.int64)
    for t in range(nt):
        for m, entry in enumerate(buckets[t]):
            dat[ptr[t] + m] = entry
    return ptr, dat


_NO_PID = np.zeros((1, 1), dtype=np.int32)
_NO_PLANAR = np.ones((1, 1, 1), dtype=np.uint8)
_NO_ANG = np.ones((1, 1), dtype=np.uint8)


def _as_psi_array(psi, spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Expand psi to a full array; infinite or non-positive entries block."""
    blocked = np.zeros((spec.ny, spec.nx), dtype=bool)
    if hasattr(psi, "psi"):
        blocked |= np.asarray(psi.blocked, dtype=bool)
        psi = psi.psi
    if np.isscalar(psi):
        arr = np.full(spec.shape, float(psi))
    else:
        arr = np.asarray(psi, dtype=float)
        if arr.shape != spec.shape:
            raise ValueError("psi shape does not match the grid")
    return arr, blocked


def solve(spec: GridSpec, stencils: list[StencilScheme], psi,
          obstacles=None, seed: tuple[int, int, int] = (0, 0, 0),
          target: tuple[int, int, int] | None = None,
          ) -> tuple[DistanceField, SolveReport]:
    """Propagate from ``seed`` until the queue empties or ``target`` accepts."""
    from . import constraints  # local import: constraints has no solver deps

    t0 = time.perf_counter()
    if len(stencils) != spec.ntheta:
        raise ValueError("need one stencil per angular level")
    psi_arr, blocked_planar = _as_psi_array(psi, spec)

    w, off, grp, num_groups = pack_stencils(stencils)
    rev_ptr, rev_dat = reverse_adjacency(w, off, spec.ntheta)

    node_ok = np.isfinite(psi_arr) & (psi_arr > 0.0)
    node_ok &= ~blocked_planar[None, :, :]
    if obstacles is not None:
        node_ok &= constraints.node_allowed(spec, obstacles)
        pid, planar_ok, ang_ok = constraints.edge_allowance(spec, off, w, obstacles)
        has_obstacles = True
    else:
        pid, planar_ok, ang_ok = _NO_PID, _NO_PLANAR, _NO_ANG
        has_obstacles = False

    if not spec.in_bounds(seed):
        raise ConfigurationError("seed index outside the grid", "solver.seed")
    seed_lin = spec.flat_index(seed)
    node_ok_flat = np.ascontiguousarray(node_ok.reshape(-1).astype(np.uint8))
    if node_ok_flat[seed_lin] == 0:
        raise ConfigurationError("seed lies in a blocked region", "solver.seed")
    _check_seed_reachable(spec, seed, node_ok_flat, w, off,
                          has_obstacles, pid, planar_ok, ang_ok,
                          rev_ptr, rev_dat)

    target_lin = spec.flat_index(target) if target is not None else -1
    rhs2 = np.where(node_ok, psi_arr * psi_arr, 0.0).reshape(-1)

    u = np.full(spec.num_nodes, INF)
    state = np.zeros(spec.num_nodes, dtype=np.uint8)
    order = np.full(spec.num_nodes, -1, dtype=np.int64)

    naccepted, stop, causal = _kernels._solve_loop(
        u, state, order, rhs2, node_ok_flat,
        w, off, grp, num_groups,
        has_obstacles, pid, planar_ok, ang_ok,
        rev_ptr, rev_dat,
        spec.nx, spec.ny, spec.ntheta, seed_lin, target_lin)

    field = DistanceField(values=u.reshape(spec.shape),
                          accepted_order=order.reshape(spec.shape),
                          seed=seed, spec=spec)
    report = SolveReport(
        accepted_count=int(naccepted),
        stop_reason="target_reached" if stop == _kernels.STOP_TARGET
        else "queue_exhausted",
        wall_time=time.perf_counter() - t0,
        causality_ok=bool(causal))
    return field, report


def _check_seed_reachable(spec, seed, node_ok_flat, w, off,
                          has_obstacles, pid, planar_ok, ang_ok,
                          rev_ptr, rev_dat) -> None:
    """The walls must leave at least one usable edge into the seed."""
    sx, sy, st = seed
    for m in range(rev_ptr[st], rev_ptr[st + 1]):
        jx = sx + int(rev_dat[m, 0])
        jy = sy + int(rev_dat[m, 1])
        tx = int(rev_dat[m, 2])
        if not (0 <= jx < spec.nx and 0 <= jy < spec.ny):
            continue
        if node_ok_flat[spec.flat_index((jx, jy, tx))] == 0:
            continue
        if not has_obstacles:
            return
        # find a matching stencil term of the dependent node
        for i in range(w.shape[1]):
            if w[tx, i] <= 0.0:
                continue
            if (jx - off[tx, i, 0] == sx and jy - off[tx, i, 1] == sy
                    and (tx - off[tx, i, 2]) % spec.ntheta == st):
                if ang_ok[tx, i] and planar_ok[pid[tx, i], jy, jx]:
                    return
    raise ConfigurationError("obstacles block every edge into the seed",
                             "solver.seed_enclosed")


def residuals(dist: DistanceField, stencils: list[StencilScheme], psi,
              obstacles=None) -> np.ndarray:
    """|lhs - rhs| of the local equation at every accepted non-seed node,
    under the frozen-neighbor convention (a neighbor counts only if it was
    accepted earlier).  Unaccepted nodes report 0."""
    from . import constraints

    spec = dist.spec
    psi_arr, blocked_planar = _as_psi_array(psi, spec)
    w, off, grp, num_groups = pack_stencils(stencils)
    node_ok = np.isfinite(psi_arr) & (psi_arr > 0.0)
    node_ok &= ~blocked_planar[None, :, :]
    if obstacles is not None:
        node_ok &= constraints.node_allowed(spec, obstacles)
        pid, planar_ok, ang_ok = constraints.edge_allowance(spec, off, w, obstacles)
        has_obstacles = True
    else:
        pid, planar_ok, ang_ok = _NO_PID, _NO_PLANAR, _NO_ANG
        has_obstacles = False

    u = dist.values
    order = dist.accepted_order
    out = np.zeros(spec.shape)
    nt, ny, nx = spec.shape
    for t in range(nt):
        for iy in range(ny):
            for ix in range(nx):
                o = order[t, iy, ix]
                if o < 0 or (ix, iy, t) == dist.seed:
                    continue
                lhs = 0.0
                for k in range(num_groups):
                    s = 0.0
                    for i in range(w.shape[1]):
                        if grp[t, i] != k or w[t, i] <= 0.0:
                            continue
                        jx = ix - off[t, i, 0]
                        jy = iy - off[t, i, 1]
                        if not (0 <= jx < nx and 0 <= jy < ny):
                            continue
                        ty = (t - off[t, i, 2]) % nt
                        if order[ty, jy, jx] < 0 or order[ty, jy, jx] >= o:
                            continue
                        if not node_ok[ty, jy, jx]:
                            continue
                        if has_obstacles and (
                                ang_ok[t, i] == 0
                                or planar_ok[pid[t, i], iy, ix] == 0):
                            continue
                        d = u[t, iy, ix] - u[ty, jy, jx]
                        if d > 0.0:
                            s += w[t, i] * d * d
                    lhs = max(lhs, s)
                out[t, iy, ix] = abs(lhs - psi_arr[t, iy, ix] ** 2)
    return out
