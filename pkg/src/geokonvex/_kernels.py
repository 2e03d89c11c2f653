"""Compiled inner loops of the fast-marching solver.

The solver state lives in flat arrays indexed by ``lin = (it*ny + iy)*nx + ix``
(x fastest).  The priority queue is a binary heap with lazy deletion; entries
compare by (value, linear index) so ties break deterministically.
"""

from __future__ import annotations

import numpy as np
from numba import njit

FAR = 0
TRIAL = 1
ACCEPTED = 2

STOP_EXHAUSTED = 0
STOP_TARGET = 1

_MAX_TERMS = 64


@njit(cache=True)
def _heap_up(keys, idxs, pos):
    key = keys[pos]
    idx = idxs[pos]
    while pos > 0:
        parent = (pos - 1) >> 1
        pk = keys[parent]
        pi = idxs[parent]
        if pk < key or (pk == key and pi <= idx):
            break
        keys[pos] = pk
        idxs[pos] = pi
        pos = parent
    keys[pos] = key
    idxs[pos] = idx


@njit(cache=True)
def _heap_down(keys, idxs, size):
    key = keys[0]
    idx = idxs[0]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size:
            if (keys[child + 1] < keys[child]
                    or (keys[child + 1] == keys[child]
                        and idxs[child + 1] < idxs[child])):
                child += 1
        ck = keys[child]
        ci = idxs[child]
        if key < ck or (key == ck and idx <= ci):
            break
        keys[pos] = ck
        idxs[pos] = ci
        pos = child
    keys[pos] = key
    idxs[pos] = idx


@njit(cache=True)
def _local_update(t, iy, ix, rhs_val, u, state, node_ok,
                  w, off, grp, num_groups,
                  has_obstacles, pid, planar_ok, ang_ok,
                  nx, ny, nt):
    """Solve the piecewise-quadratic local equation at one node."""
    nterms = w.shape[1]
    vals = np.empty(_MAX_TERMS)
    wts = np.empty(_MAX_TERMS)
    best = np.inf
    for k in range(num_groups):
        cnt = 0
        for i in range(nterms):
            if grp[t, i] != k:
                continue
            wi = w[t, i]
            if wi <= 0.0:
                continue
            jx = ix - off[t, i, 0]
            jy = iy - off[t, i, 1]
            if jx < 0 or jx >= nx or jy < 0 or jy >= ny:
                continue
            ty = (t - off[t, i, 2]) % nt
            ylin = (ty * ny + jy) * nx + jx
            if state[ylin] != ACCEPTED or node_ok[ylin] == 0:
                continue
            if has_obstacles:
                if ang_ok[t, i] == 0:
                    continue
                if planar_ok[pid[t, i], iy, ix] == 0:
                    continue
            v = u[ylin]
            # insertion sort, ascending in v
            j = cnt
            while j > 0 and vals[j - 1] > v:
                vals[j] = vals[j - 1]
                wts[j] = wts[j - 1]
                j -= 1
            vals[j] = v
            wts[j] = wi
            cnt += 1
        if cnt == 0:
            continue
        a = 0.0
        b = 0.0
        c = 0.0
        sol = np.inf
        for m in range(cnt):
            a += wts[m]
            b += wts[m] * vals[m]
            c += wts[m] * vals[m] * vals[m]
            disc = b * b - a * (c - rhs_val)
            if disc < 0.0:
                disc = 0.0
            cand = (b + np.sqrt(disc)) / a
            if m + 1 >= cnt or cand <= vals[m + 1]:
                sol = cand
                break
        if sol < best:
            best = sol
    return best


@njit(cache=True)
def _solve_loop(u, state, order, rhs2, node_ok,
                w, off, grp, num_groups,
                has_obstacles, pid, planar_ok, ang_ok,
                rev_ptr, rev_dat,
                nx, ny, nt, seed_lin, target_lin):
    """Single-pass fast marching.  Returns (accepted, stop, causality_ok)."""
    cap = 4 * nx * ny + 1024
    keys = np.empty(cap)
    idxs = np.empty(cap, dtype=np.int64)
    size = 0

    keys[0] = 0.0
    idxs[0] = seed_lin
    size = 1
    u[seed_lin] = 0.0
    state[seed_lin] = TRIAL

    naccepted = 0
    last = -np.inf
    causality_ok = True
    stop = STOP_EXHAUSTED

    while size > 0:
        val = keys[0]
        lin = idxs[0]
        size -= 1
        keys[0] = keys[size]
        idxs[0] = idxs[size]
        if size > 0:
            _heap_down(keys, idxs, size)
        if state[lin] == ACCEPTED or val > u[lin]:
            continue
        state[lin] = ACCEPTED
        order[lin] = naccepted
        naccepted += 1
        if val < last:
            causality_ok = False
        last = val
        if lin == target_lin:
            stop = STOP_TARGET
            break

        ty = lin // (ny * nx)
        rem = lin - ty * ny * nx
        iy = rem // nx
        ix = rem - iy * nx

        for m in range(rev_ptr[ty], rev_ptr[ty + 1]):
            jx = ix + rev_dat[m, 0]
            jy = iy + rev_dat[m, 1]
            if jx < 0 or jx >= nx or jy < 0 or jy >= ny:
                continue
            tx = rev_dat[m, 2]
            xlin = (tx * ny + jy) * nx + jx
            if state[xlin] == ACCEPTED or node_ok[xlin] == 0:
                continue
            cand = _local_update(tx, jy, jx, rhs2[xlin], u, state, node_ok,
                                 w, off, grp, num_groups,
                                 has_obstacles, pid, planar_ok, ang_ok,
                                 nx, ny, nt)
            if cand < u[xlin]:
                u[xlin] = cand
                state[xlin] = TRIAL
                if size >= keys.shape[0]:
                    newcap = 2 * keys.shape[0]
                    nk = np.empty(newcap)
                    ni = np.empty(newcap, dtype=np.int64)
                    nk[:size] = keys[:size]
                    ni[:size] = idxs[:size]
                    keys = nk
                    idxs = ni
                keys[size] = cand
                idxs[size] = xlin
                size += 1
                _heap_up(keys, idxs, size - 1)

    return naccepted, stop, causality_ok


@njit(cache=True)
def flow_field_kernel(u, order, node_ok,
                      w, off, grp, num_groups,
                      has_obstacles, pid, planar_ok, ang_ok,
                      hx, ht, nx, ny, nt):
    """Nodal geodesic flow: winning-group weighted sum of upwind drops.

    Output components are physical (pixels, pixels, radians) per unit of the
    intrinsic parameter.  Nodes with infinite value get a zero vector.
    """
    out = np.zeros((nt, ny, nx, 3))
    nterms = w.shape[1]
    for t in range(nt):
        for iy in range(ny):
            for ix in range(nx):
                lin = (t * ny + iy) * nx + ix
                if order[lin] < 0 or not np.isfinite(u[lin]):
                    continue
                u0 = u[lin]
                best_k = -1
                best_s = 0.0
                for k in range(num_groups):
                    s = 0.0
                    for i in range(nterms):
                        if grp[t, i] != k:
                            continue
                        wi = w[t, i]
                        if wi <= 0.0:
                            continue
                        jx = ix - off[t, i, 0]
                        jy = iy - off[t, i, 1]
                        if jx < 0 or jx >= nx or jy < 0 or jy >= ny:
                            continue
                        ty = (t - off[t, i, 2]) % nt
                        ylin = (ty * ny + jy) * nx + jx
                        if order[ylin] < 0 or node_ok[ylin] == 0:
                            continue
                        if has_obstacles:
                            if ang_ok[t, i] == 0:
                                continue
                            if planar_ok[pid[t, i], iy, ix] == 0:
                                continue
                        d = u0 - u[ylin]
                        if d > 0.0:
                            s += wi * d * d
                    if s > best_s:
                        best_s = s
                        best_k = k
                if best_k < 0:
                    continue
                vx = 0.0
                vy = 0.0
                vt = 0.0
                for i in range(nterms):
                    if grp[t, i] != best_k:
                        continue
                    wi = w[t, i]
                    if wi <= 0.0:
                        continue
                    jx = ix - off[t, i, 0]
                    jy = iy - off[t, i, 1]
                    if jx < 0 or jx >= nx or jy < 0 or jy >= ny:
                        continue
                    ty = (t - off[t, i, 2]) % nt
                    ylin = (ty * ny + jy) * nx + jx
                    if order[ylin] < 0 or node_ok[ylin] == 0:
                        continue
                    if has_obstacles:
                        if ang_ok[t, i] == 0:
                            continue
                        if planar_ok[pid[t, i], iy, ix] == 0:
                            continue
                    d = u0 - u[ylin]
                    if d > 0.0:
                        vx += wi * d * off[t, i, 0] * hx
                        vy += wi * d * off[t, i, 1] * hx
                        vt += wi * d * off[t, i, 2] * ht
                out[t, iy, ix, 0] = vx
                out[t, iy, ix, 1] = vy
                out[t, iy, ix, 2] = vt
    return out
