"""Geodesic model definitions: curvature penalties, metrics, Hamiltonians,
and their finite-difference stencils.

Six models are supported: the forward-only Reeds-Shepp car, the Dubins car,
and the Euler-Mumford elastica, each in a classical variant and in a
convexity-constrained variant whose admissible motions have non-negative
angular speed.  Writing ``a = <w_planar, n_theta>`` and ``b = w_theta / beta``
for a co-vector ``w``, the closed-form Hamiltonians are

    RSF classical       2H = (a)_+^2 + b^2
    RSF convex          2H = (a)_+^2 + (b)_+^2
    Dubins classical    2H = max{ (a+b)_+^2, (a-b)_+^2 }
    Dubins convex       2H = max{ (a+b)_+^2, (a)_+^2 }
    elastica classical  2H = (a + sqrt(a^2 + b^2))^2 / 4
    elastica convex      H = r^2 * elastica_polar_profile(phi),
                             (a, b) = r (cos phi, sin phi)

The solver consumes none of these closed forms directly; it uses per-level
stencils built from integer-offset decompositions of the model's control
vectors, expressed in grid coordinates (planar components divided by ``hx``,
angular by ``htheta``) so the h^2 factor of the upwind scheme is absorbed
into the weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import CoVector, GridSpec, TangentVector, angular_difference
from .selling import Decomposition, decompose2, decompose3

_ALIGN_TOL = 1e-9  # angular tolerance for "planar velocity parallel to n_theta"


class ModelFamily(Enum):
    REEDS_SHEPP_FORWARD = "rsf"
    DUBINS = "dubins"
    ELASTICA = "em"


@dataclass(frozen=True)
class ModelKind:
    family: ModelFamily
    convexity_constrained: bool = True

    @property
    def name(self) -> str:
        suffix = "convexity" if self.convexity_constrained else "classical"
        return f"{self.family.value}-{suffix}"


@dataclass(frozen=True)
class ModelParams:
    """beta: curvature-radius scale (pixels); eps_relax: stencil relaxation;
    quad_points: quadrature node count for the elastica models."""

    beta: float = 1.0
    eps_relax: float = 0.1
    quad_points: int = 5
    # Alternative elastica scheme: keep the full quadrature weights and drop
    # offsets with a negative angular component instead.  Consistent but with
    # a larger error; off by default.
    elastica_mask_negative_offsets: bool = False

    def __post_init__(self):
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive")
        if not (0.0 < self.eps_relax < 1.0):
            raise ValueError("eps_relax must lie in (0, 1)")
        if self.quad_points < 1:
            raise ValueError("quad_points must be >= 1")


ALL_MODELS = tuple(
    ModelKind(fam, conv)
    for fam in ModelFamily
    for conv in (True, False)
)


# ---------------------------------------------------------------------------
# quadrature for the elastica integral form


@dataclass(frozen=True)
class FejerRule:
    """Interpolatory rule for the cosine-weighted integral on [-pi/2, pi/2].

    ``convex_weights`` halves the weight of a node at zero and zeroes the
    negative nodes, which restricts the rule to the forward-turn half
    [0, pi/2] of the integral.
    """

    nodes: np.ndarray
    weights: np.ndarray
    convex_weights: np.ndarray


def fejer_rule(L: int) -> FejerRule:
    if L < 1:
        raise ValueError("need at least one quadrature node")
    ls = np.arange(1, L + 1)
    nodes = (2 * ls - L - 1) * math.pi / (2 * L)
    # First Fejer rule on [-1, 1] mapped through s = sin(phi).
    t = (2 * ls - 1) * math.pi / (2 * L)
    weights = np.full(L, 1.0)
    for m in range(1, L // 2 + 1):
        weights -= 2.0 * np.cos(2 * m * t) / (4 * m * m - 1)
    weights *= 2.0 / L
    convex = np.where(nodes > 1e-12, weights,
                      np.where(np.abs(nodes) <= 1e-12, weights / 2.0, 0.0))
    return FejerRule(nodes, weights, convex)


# ---------------------------------------------------------------------------
# closed forms


def elastica_polar_profile(phi: float) -> float:
    """Angular profile of the forward-turn elastica Hamiltonian.

    Equals ``(3/8) * integral_0^{pi/2} (cos(t - phi))_+^2 cos(t) dt`` for
    ``phi`` in [-pi, pi], evaluated in closed form.
    """
    if not (-math.pi - 1e-12 <= phi <= math.pi + 1e-12):
        raise ValueError("phi must lie in [-pi, pi]")
    phi = min(max(phi, -math.pi), math.pi)
    c = math.cos(phi)
    s = math.sin(phi)
    if phi <= -math.pi / 2:
        v = 0.0
    elif phi <= 0.0:
        v = 2.0 * c + 2.0 * c * s
    elif phi <= math.pi / 2:
        v = 1.0 + c * c + 2.0 * c * s
    else:
        v = 1.0 + c * c + 2.0 * c
    return v / 8.0


def _plus(a: float) -> float:
    return a if a > 0.0 else 0.0


def hamiltonian_eval(model: ModelKind, params: ModelParams,
                     theta: float, xhat: CoVector) -> float:
    """Closed-form Hamiltonian of the model at orientation ``theta``."""
    a = xhat.hx * math.cos(theta) + xhat.hy * math.sin(theta)
    b = xhat.htheta / params.beta
    fam = model.family
    if fam is ModelFamily.REEDS_SHEPP_FORWARD:
        if model.convexity_constrained:
            return 0.5 * (_plus(a) ** 2 + _plus(b) ** 2)
        return 0.5 * (_plus(a) ** 2 + b * b)
    if fam is ModelFamily.DUBINS:
        first = _plus(a + b) ** 2
        second = _plus(a) ** 2 if model.convexity_constrained else _plus(a - b) ** 2
        return 0.5 * max(first, second)
    if model.convexity_constrained:
        r = math.hypot(a, b)
        if r == 0.0:
            return 0.0
        return r * r * elastica_polar_profile(math.atan2(b, a))
    return (a + math.hypot(a, b)) ** 2 / 8.0


def _aligned_speed(theta: float, xdot: TangentVector) -> float | None:
    """Planar speed when the planar velocity is a non-negative multiple of
    n_theta (within the angular tolerance), else None."""
    s = xdot.planar_norm
    if s == 0.0:
        return 0.0
    direction = math.atan2(xdot.dy, xdot.dx)
    if abs(angular_difference(direction, theta)) > _ALIGN_TOL:
        return None
    return s


def metric_eval(model: ModelKind, params: ModelParams,
                theta: float, xdot: TangentVector) -> float:
    """Closed-form metric; infinite off the model's admissible cone."""
    s = _aligned_speed(theta, xdot)
    if s is None:
        return math.inf
    nu = params.beta * xdot.dtheta
    fam = model.family
    if model.convexity_constrained and xdot.dtheta < 0.0:
        return math.inf
    if fam is ModelFamily.REEDS_SHEPP_FORWARD:
        return math.hypot(s, nu)
    if fam is ModelFamily.DUBINS:
        lo = 0.0 if model.convexity_constrained else -s
        return s if lo <= nu <= s else math.inf
    # elastica
    if s == 0.0:
        return 0.0 if nu == 0.0 else math.inf
    if not model.convexity_constrained:
        return s + nu * nu / s
    if nu <= 0.0:
        return math.inf
    if nu <= s / 2.0:
        sq = (8.0 / (27.0 * nu)) * (9.0 * s * nu * nu + s ** 3
                                    + (s * s - 3.0 * nu * nu) ** 1.5)
    elif nu <= s:
        sq = 4.0 * (s * s - 2.0 * s * nu + 2.0 * nu * nu)
    else:
        sq = (s + nu * nu / s) ** 2
    return math.sqrt(sq)


def curvature_penalty(model: ModelKind, nu: float) -> float:
    """Penalty per unit length as a function of ``nu = beta * curvature``."""
    fam = model.family
    convex = model.convexity_constrained
    if fam is ModelFamily.REEDS_SHEPP_FORWARD:
        if convex and nu < 0.0:
            return math.inf
        return math.sqrt(1.0 + nu * nu)
    if fam is ModelFamily.DUBINS:
        lo = 0.0 if convex else -1.0
        return 1.0 if lo <= nu <= 1.0 else math.inf
    if not convex:
        return 1.0 + nu * nu
    if nu <= 0.0:
        return math.inf
    if nu <= 0.5:
        return math.sqrt((8.0 / (27.0 * nu))
                         * (9.0 * nu * nu + 1.0 + (1.0 - 3.0 * nu * nu) ** 1.5))
    if nu <= 1.0:
        return 2.0 * math.sqrt(1.0 - 2.0 * nu + 2.0 * nu * nu)
    return 1.0 + nu * nu


# ---------------------------------------------------------------------------
# stencils


@dataclass(frozen=True)
class StencilScheme:
    """Discretized Hamiltonian at one angular level.

    Terms are (weight, integer offset) pairs partitioned into groups; the
    scheme value is the max over groups of the within-group sums of weighted
    half-squared upwind differences.  Offsets step in grid indices: offset
    (e1, e2, e3) at node x reaches the neighbor x - (hx*e1, hx*e2, ht*e3).
    Weights carry grid units, so the local equation right-hand side is
    ``psi(x)^2`` with no extra h^2 factor.
    """

    theta_index: int
    weights: np.ndarray          # (I,) float64, all >= 0
    offsets: np.ndarray          # (I, 3) int64
    groups: np.ndarray           # (I,) uint8
    num_groups: int = 1

    def __post_init__(self):
        if np.any(self.weights < 0.0):
            raise ValueError("stencil weights must be non-negative")


def _control_to_grid(v: np.ndarray, spec: GridSpec) -> np.ndarray:
    return np.array([v[0] / spec.hx, v[1] / spec.hx, v[2] / spec.htheta])


def _lift2(dec: Decomposition) -> tuple[np.ndarray, np.ndarray]:
    offs = np.zeros((len(dec.weights), 3), dtype=np.int64)
    offs[:, :2] = dec.offsets
    return dec.weights.copy(), offs


def build_stencil(model: ModelKind, params: ModelParams,
                  theta_index: int, spec: GridSpec) -> StencilScheme:
    """Construct the stencil for one angular level of the grid."""
    if not 0 <= theta_index < spec.ntheta:
        raise ValueError("theta_index out of range")
    theta = spec.theta_of_level(theta_index)
    n = np.array([math.cos(theta), math.sin(theta)])
    eps = params.eps_relax
    beta = params.beta
    fam = model.family

    w_list: list[np.ndarray] = []
    o_list: list[np.ndarray] = []
    g_list: list[np.ndarray] = []

    def add(weights: np.ndarray, offsets: np.ndarray, group: int) -> None:
        w_list.append(weights)
        o_list.append(offsets)
        g_list.append(np.full(len(weights), group, dtype=np.uint8))

    if fam is ModelFamily.REEDS_SHEPP_FORWARD:
        w, o = _lift2(decompose2(n / spec.hx, eps))
        add(w, o, 0)
        ang_w = (1.0 / (beta * spec.htheta)) ** 2
        add(np.array([ang_w]), np.array([[0, 0, 1]], dtype=np.int64), 0)
        if not model.convexity_constrained:
            add(np.array([ang_w]), np.array([[0, 0, -1]], dtype=np.int64), 0)
        num_groups = 1
    elif fam is ModelFamily.DUBINS:
        q_plus = np.array([n[0], n[1], 1.0 / beta])
        dec = decompose3(_control_to_grid(q_plus, spec), eps)
        add(dec.weights, dec.offsets, 0)
        if model.convexity_constrained:
            w, o = _lift2(decompose2(n / spec.hx, eps))
            add(w, o, 1)
        else:
            q_minus = np.array([n[0], n[1], -1.0 / beta])
            dec = decompose3(_control_to_grid(q_minus, spec), eps)
            add(dec.weights, dec.offsets, 1)
        num_groups = 2
    else:
        rule = fejer_rule(params.quad_points)
        scale = math.sqrt(3.0) / 2.0
        if model.convexity_constrained and not params.elastica_mask_negative_offsets:
            node_weights = rule.convex_weights
        else:
            node_weights = rule.weights
        for phi, wl in zip(rule.nodes, node_weights):
            if wl <= 0.0:
                continue
            q = scale * np.array([n[0] * math.cos(phi), n[1] * math.cos(phi),
                                  math.sin(phi) / beta])
            dec = decompose3(_control_to_grid(q, spec), eps)
            weights = wl * dec.weights
            offsets = dec.offsets
            if model.convexity_constrained and params.elastica_mask_negative_offsets:
                weights = np.where(offsets[:, 2] < 0, 0.0, weights)
            add(weights, offsets, 0)
        num_groups = 1

    return StencilScheme(
        theta_index=theta_index,
        weights=np.concatenate(w_list),
        offsets=np.concatenate(o_list),
        groups=np.concatenate(g_list),
        num_groups=num_groups,
    )


def build_stencil_cache(model: ModelKind, params: ModelParams,
                        spec: GridSpec) -> list[StencilScheme]:
    """Stencils for every angular level; offsets depend only on the level."""
    return [build_stencil(model, params, t, spec) for t in range(spec.ntheta)]


def scheme_hamiltonian(scheme: StencilScheme, xhat: CoVector,
                       spec: GridSpec) -> float:
    """Evaluate the discretized Hamiltonian of a scheme on a co-vector.

    Used by consistency tests; offsets are rescaled back to physical units.
    """
    w = np.array([xhat.hx, xhat.hy, xhat.htheta])
    scale = np.array([spec.hx, spec.hx, spec.htheta])
    dots = (scheme.offsets * scale) @ w
    contrib = scheme.weights * np.maximum(dots, 0.0) ** 2
    best = 0.0
    for k in range(scheme.num_groups):
        best = max(best, float(np.sum(contrib[scheme.groups == k])))
    return 0.5 * best
