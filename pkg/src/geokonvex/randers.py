"""Image-driven velocities: edge tensors, the curl-constrained drift field,
and their assembly into orientation-dependent costs.

The edge tensor penalizes motion across image gradients.  The drift field
converts the region-homogeneity potential difference into a directional
(Randers-type) cost via its curl.  Both normalized terms feed an exponential
cost sampled per orientation level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import cg

from .errors import SolverError
from .grid import GridSpec


@dataclass(frozen=True)
class EdgeTensorField:
    """Per-pixel symmetric 2x2 tensors packed as (m11, m12, m22)."""

    m11: np.ndarray
    m12: np.ndarray
    m22: np.ndarray

    def direction_norm(self, theta: float) -> np.ndarray:
        """| n_theta |_M per pixel."""
        c, s = math.cos(theta), math.sin(theta)
        q = c * c * self.m11 + 2.0 * c * s * self.m12 + s * s * self.m22
        return np.sqrt(np.maximum(q, 0.0))

    def max_eigenvalue(self) -> np.ndarray:
        half = 0.5 * (self.m11 + self.m22)
        rad = np.sqrt(np.maximum(0.25 * (self.m11 - self.m22) ** 2
                                 + self.m12 ** 2, 0.0))
        return half + rad

    def sup_direction_norm(self) -> float:
        return float(np.sqrt(self.max_eigenvalue().max()))


@dataclass(frozen=True)
class RandersVectorField:
    """Drift field: co-located per-pixel vectors plus the staggered
    components it was built from (x-component on horizontal half-edges,
    y-component on vertical half-edges)."""

    vectors: np.ndarray      # (ny, nx, 2), zero outside the support
    stag_x: np.ndarray       # (ny - 1, nx)
    stag_y: np.ndarray       # (ny, nx - 1)
    support: np.ndarray      # (ny, nx) bool

    def sup_norm(self) -> float:
        return float(np.hypot(self.vectors[..., 0], self.vectors[..., 1]).max())


@dataclass(frozen=True)
class VelocityField:
    """Cost samples over the lifted grid; ``blocked`` marks pixels outside
    the admissible region (treated as +inf by the solver)."""

    psi: np.ndarray          # (ntheta, ny, nx), positive where usable
    blocked: np.ndarray      # (ny, nx) bool


def edge_tensor(image: np.ndarray, sigma: float = 2.0,
                lambda_edge: float = 100.0) -> EdgeTensorField:
    """Id plus a rank-one penalty along the local gradient direction.

    The gradient direction comes from the principal axis of the smoothed
    multi-channel structure tensor; the gradient strength is normalized to
    [0, 1], so eigenvalues range within [1, 1 + lambda_edge].
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if lambda_edge < 0.0:
        raise ValueError("lambda_edge must be non-negative")
    img = np.asarray(image, dtype=float)
    chans = img[..., None] if img.ndim == 2 else img
    j11 = np.zeros(chans.shape[:2])
    j12 = np.zeros_like(j11)
    j22 = np.zeros_like(j11)
    for c in range(chans.shape[2]):
        smooth = ndimage.gaussian_filter(chans[:, :, c], sigma)
        gy, gx = np.gradient(smooth)
        j11 += gx * gx
        j12 += gx * gy
        j22 += gy * gy
    half = 0.5 * (j11 + j22)
    rad = np.sqrt(np.maximum(0.25 * (j11 - j22) ** 2 + j12 ** 2, 0.0))
    lam_max = half + rad
    g = np.sqrt(np.maximum(lam_max, 0.0))
    gmax = g.max()
    if gmax > 0.0:
        g = g / gmax
    # unit principal eigenvector (vx, vy) of the structure tensor
    vx = np.where(rad > 1e-30, j12, 0.0)
    vy = np.where(rad > 1e-30, lam_max - j11, 0.0)
    norm = np.hypot(vx, vy)
    degenerate = norm < 1e-15
    # when j12 ~ 0 the principal axis is a coordinate axis
    vx = np.where(degenerate, (j11 >= j22).astype(float), vx / np.where(degenerate, 1.0, norm))
    vy = np.where(degenerate, (j11 < j22).astype(float), vy / np.where(degenerate, 1.0, norm))
    flat = g <= 0.0
    vx = np.where(flat, 0.0, vx)
    vy = np.where(flat, 0.0, vy)
    return EdgeTensorField(
        m11=1.0 + lambda_edge * g * vx * vx,
        m12=lambda_edge * g * vx * vy,
        m22=1.0 + lambda_edge * g * vy * vy)


def solve_curl(rhs: np.ndarray, support: np.ndarray) -> RandersVectorField:
    """Minimal-style drift field with prescribed curl on a masked region.

    Solves the Poisson problem (Laplacian phi = rhs, phi = 0 off the region)
    by conjugate gradients, then rotates the staggered gradient:
    w = (-d phi/dy, d phi/dx).  The discrete curl of the staggered output
    reproduces ``rhs`` at interior nodes and its discrete divergence vanishes
    identically at cell centers.
    """
    rhs = np.asarray(rhs, dtype=float)
    mask = np.asarray(support, dtype=bool)
    if rhs.shape != mask.shape:
        raise ValueError("rhs and support shapes differ")
    ny, nx = mask.shape
    idx = -np.ones(mask.shape, dtype=np.int64)
    order = np.flatnonzero(mask.ravel())
    if len(order) == 0:
        raise ValueError("empty support region")
    idx.ravel()[order] = np.arange(len(order))
    n = len(order)

    rows, cols, vals = [], [], []
    b = np.zeros(n)
    ys, xs = np.nonzero(mask)
    for k, (iy, ix) in enumerate(zip(ys, xs)):
        rows.append(k)
        cols.append(k)
        vals.append(4.0)
        b[k] = -rhs[iy, ix]
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            jy, jx = iy + dy, ix + dx
            if 0 <= jy < ny and 0 <= jx < nx and mask[jy, jx]:
                rows.append(k)
                cols.append(idx[jy, jx])
                vals.append(-1.0)
            # off-support neighbors contribute phi = 0
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    maxiter = 10 * n
    x, info = cg(A, b, rtol=0.0, atol=1e-11 * max(1.0, float(np.abs(b).max())) * math.sqrt(n),
                 maxiter=maxiter)
    if info != 0:
        raise SolverError(f"curl solve did not converge (info={info})",
                          "solver.curl.nonconvergence")
    resid = float(np.abs(A @ x - b).max())
    if resid > 1e-8 * max(1.0, float(np.abs(b).max())):
        raise SolverError(f"curl solve residual too large ({resid:.2e})",
                          "solver.curl.residual")

    phi = np.zeros(mask.shape)
    phi[mask] = x
    stag_x = -(phi[1:, :] - phi[:-1, :])     # x-component at (iy+1/2, ix)
    stag_y = phi[:, 1:] - phi[:, :-1]        # y-component at (iy, ix+1/2)

    vec = np.zeros((ny, nx, 2))
    vec[1:-1, :, 0] = -(phi[2:, :] - phi[:-2, :]) / 2.0
    vec[:, 1:-1, 1] = (phi[:, 2:] - phi[:, :-2]) / 2.0
    vec[~mask] = 0.0
    return RandersVectorField(vectors=vec, stag_x=stag_x, stag_y=stag_y,
                              support=mask)


def discrete_curl(field: RandersVectorField) -> np.ndarray:
    """curl = d(w_y)/dx - d(w_x)/dy at interior nodes, from the staggered
    components; rows/cols touching the boundary are zero."""
    ny, nx = field.support.shape
    out = np.zeros((ny, nx))
    out[1:-1, 1:-1] = ((field.stag_y[1:-1, 1:] - field.stag_y[1:-1, :-1])
                       - (field.stag_x[1:, 1:-1] - field.stag_x[:-1, 1:-1]))
    return out


def discrete_divergence(field: RandersVectorField) -> np.ndarray:
    """div at cell centers (iy+1/2, ix+1/2); identically zero by construction."""
    return ((field.stag_x[:, 1:] - field.stag_x[:, :-1])
            + (field.stag_y[1:, :] - field.stag_y[:-1, :]))


def build_velocity(tensors: EdgeTensorField, drift: RandersVectorField | None,
                   support: np.ndarray, alpha: float, mu: float,
                   spec: GridSpec) -> VelocityField:
    """Exponential directional cost on the admissible region.

    psi(x, theta) = exp(alpha * (|n_theta|_M / sup_M + mu <w, n_theta> / sup_w))
    inside the region; pixels outside are blocked (treated as infinite).
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    mask = np.asarray(support, dtype=bool)
    sup_m = tensors.sup_direction_norm()
    sup_w = drift.sup_norm() if drift is not None else 0.0
    psi = np.empty(spec.shape)
    for t in range(spec.ntheta):
        theta = spec.theta_of_level(t)
        term = tensors.direction_norm(theta) / sup_m
        if drift is not None and sup_w > 0.0:
            dot = (drift.vectors[..., 0] * math.cos(theta)
                   + drift.vectors[..., 1] * math.sin(theta))
            term = term + mu * dot / sup_w
        psi[t] = np.exp(alpha * term)
    return VelocityField(psi=psi, blocked=~mask)


def build_edge_velocity(tensors: EdgeTensorField, spec: GridSpec,
                        alpha: float = 1.0) -> VelocityField:
    """Edge-only cost over the whole image, independent of any region."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    sup_m = tensors.sup_direction_norm()
    psi = np.empty(spec.shape)
    for t in range(spec.ntheta):
        theta = spec.theta_of_level(t)
        psi[t] = np.exp(alpha * tensors.direction_norm(theta) / sup_m)
    return VelocityField(psi=psi,
                         blocked=np.zeros((spec.ny, spec.nx), dtype=bool))
