"""Non-negative integer-offset decompositions of half-quadratic forms.

Given a direction ``v`` and a relaxation parameter ``eps`` in (0, 1), the
relaxed rank-one tensor

    D = (1 - eps^2) v v^T + eps^2 |v|^2 Id

is written exactly as ``sum_j rho_j e_j e_j^T`` with scalar weights
``rho_j >= 0`` and integer offsets ``e_j``, using obtuse-superbase (Selling)
reduction: 3 terms in dimension two, 6 in dimension three.  Each offset is
then sign-flipped so that ``<e_j, v> >= 0``, which makes the half-space sum
``sum_j rho_j <w, e_j>_+^2`` approximate ``<w, v>_+^2`` up to an
``O(eps^2) |w|^2`` error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MAX_REDUCE_ITERS = 100


@dataclass(frozen=True)
class Decomposition:
    """Weights ``(J,)`` and integer offsets ``(J, d)`` with J = 3 or 6."""

    weights: np.ndarray
    offsets: np.ndarray

    @property
    def dim(self) -> int:
        return self.offsets.shape[1]

    def reconstruct(self) -> np.ndarray:
        """Return ``sum_j rho_j e_j e_j^T``."""
        e = self.offsets.astype(float)
        return np.einsum("j,ji,jk->ik", self.weights, e, e)

    def halfspace_form(self, w: np.ndarray) -> float:
        """Evaluate ``sum_j rho_j <w, e_j>_+^2``."""
        dots = self.offsets.astype(float) @ np.asarray(w, dtype=float)
        return float(np.sum(self.weights * np.maximum(dots, 0.0) ** 2))


def relaxed_tensor(v: np.ndarray, eps: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return (1.0 - eps * eps) * np.outer(v, v) + eps * eps * float(v @ v) * np.eye(len(v))


def _check_args(v: np.ndarray, eps: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)) or float(v @ v) == 0.0:
        raise ValueError("direction vector must be finite and nonzero")
    if not (0.0 < eps < 1.0):
        raise ValueError("relaxation parameter must lie in (0, 1)")
    return v


def _reduce_superbase(basis: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Selling reduction: make all pairwise D-inner-products non-positive.

    A violating pair (i, j) flips e_i and compensates the remaining vectors
    so the superbase identity sum(e) = 0 is preserved: the other two vectors
    gain e_i in dimension three, the single other vector gains 2 e_i in
    dimension two.  Ties between equally violating pairs resolve to the
    lexicographically first pair, so the reduction path is reproducible bit
    for bit.
    """
    m = basis.shape[0]
    gain = 2 if m == 3 else 1
    tol = 1e-14 * float(np.trace(D))
    for _ in range(_MAX_REDUCE_ITERS):
        gram = basis @ D @ basis.T
        best_i = best_j = -1
        best_val = tol
        for i in range(m):
            for j in range(i + 1, m):
                if gram[i, j] > best_val:
                    best_i, best_j, best_val = i, j, gram[i, j]
        if best_i < 0:
            return basis
        new = basis.copy()
        for k in range(m):
            if k == best_i:
                new[k] = -basis[best_i]
            elif k != best_j:
                new[k] = basis[k] + gain * basis[best_i]
        basis = new
    raise RuntimeError("superbase reduction failed to terminate; "
                       "the relaxed tensor is not positive definite")


def _align_offset(off: np.ndarray, v: np.ndarray) -> np.ndarray:
    d = float(off @ v)
    if d < 0.0:
        return -off
    if d == 0.0:
        # canonical sign: first nonzero component positive
        for c in off:
            if c != 0:
                return off if c > 0 else -off
    return off


def decompose2(v: np.ndarray, eps: float) -> Decomposition:
    """Three-term decomposition of the relaxed tensor of a planar direction."""
    v = _check_args(v, eps)
    if v.shape != (2,):
        raise ValueError("decompose2 expects a 2-vector")
    D = relaxed_tensor(v, eps)
    basis = _reduce_superbase(
        np.array([[1, 0], [0, 1], [-1, -1]], dtype=np.int64), D)
    weights = np.empty(3)
    offsets = np.empty((3, 2), dtype=np.int64)
    pairs = ((0, 1, 2), (0, 2, 1), (1, 2, 0))
    for term, (i, j, k) in enumerate(pairs):
        weights[term] = max(0.0, -float(basis[i] @ D @ basis[j]))
        perp = np.array([-basis[k, 1], basis[k, 0]], dtype=np.int64)
        offsets[term] = _align_offset(perp, v)
    return _checked(Decomposition(weights, offsets), D)


def decompose3(v: np.ndarray, eps: float) -> Decomposition:
    """Six-term decomposition of the relaxed tensor of a 3-vector."""
    v = _check_args(v, eps)
    if v.shape != (3,):
        raise ValueError("decompose3 expects a 3-vector")
    D = relaxed_tensor(v, eps)
    basis = _reduce_superbase(
        np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, -1, -1]],
                 dtype=np.int64), D)
    weights = np.empty(6)
    offsets = np.empty((6, 3), dtype=np.int64)
    term = 0
    for i in range(4):
        for j in range(i + 1, 4):
            k, l = [m for m in range(4) if m not in (i, j)]
            weights[term] = max(0.0, -float(basis[i] @ D @ basis[j]))
            offsets[term] = _align_offset(np.cross(basis[k], basis[l]), v)
            term += 1
    return _checked(Decomposition(weights, offsets), D)


def _checked(dec: Decomposition, D: np.ndarray) -> Decomposition:
    err = float(np.abs(dec.reconstruct() - D).max())
    if err > 1e-10 * max(1.0, float(np.trace(D))):
        raise RuntimeError(f"decomposition failed to reconstruct its tensor "
                           f"(error {err:.3e})")
    return dec
