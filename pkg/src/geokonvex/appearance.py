"""Region appearance models: Gaussian mixtures and piecewise-constant means.

Both produce the pair of potential maps (xi1, xi2) scoring how badly a pixel
fits the inside / outside region statistics; the difference xi1 - xi2 drives
the region term of the contour velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

XI_CLAMP = 50.0
_VAR_FLOOR_REL = 1e-4
_VAR_FLOOR_ABS = 1e-10


@dataclass(frozen=True)
class GmmModel:
    """Diagonal-covariance mixture: weights (N,), means (N, d), variances (N, d)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """Stable mixture log-density of samples x with shape (m, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        diff = x[:, None, :] - self.means[None, :, :]      # (m, N, d)
        inv = 1.0 / self.variances[None, :, :]
        quad = np.sum(diff * diff * inv, axis=2)
        logn = -0.5 * (quad + np.sum(np.log(2.0 * math.pi * self.variances),
                                     axis=1)[None, :])
        logn = logn + np.log(np.maximum(self.weights, 1e-300))[None, :]
        mx = logn.max(axis=1)
        return mx + np.log(np.sum(np.exp(logn - mx[:, None]), axis=1))


@dataclass(frozen=True)
class PotentialMaps:
    xi1: np.ndarray
    xi2: np.ndarray


def _as_samples(pixels) -> np.ndarray:
    x = np.asarray(pixels, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x


def _kmeans_seed(x: np.ndarray, n: int, rng: np.random.Generator):
    """Deterministic k-means++ seeding plus a few Lloyd iterations."""
    m = len(x)
    centers = [x[int(rng.integers(m))]]
    for _ in range(n - 1):
        d2 = np.min([np.sum((x - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0.0:
            centers.append(x[int(rng.integers(m))])
            continue
        centers.append(x[int(rng.choice(m, p=d2 / total))])
    centers = np.array(centers)
    for _ in range(20):
        d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        label = d2.argmin(axis=1)
        moved = 0.0
        for k in range(n):
            sel = x[label == k]
            if len(sel):
                newc = sel.mean(axis=0)
                moved = max(moved, float(np.abs(newc - centers[k]).max()))
                centers[k] = newc
        if moved < 1e-9:
            break
    return centers, label


def fit_gmm(pixels, n_components: int = 5, *, max_iter: int = 100,
            tol: float = 1e-6, seed: int = 0) -> GmmModel:
    """Expectation-maximization with k-means seeding.

    Covariances are diagonal with an eigenvalue floor of 1e-4 times the data
    variance (absolute floor 1e-10 for constant data).  The log-likelihood is
    asserted non-decreasing across iterations.
    """
    x = _as_samples(pixels)
    m, d = x.shape
    if m < n_components * (d + 1):
        raise ValidationError(
            f"need at least {n_components * (d + 1)} samples to fit "
            f"{n_components} components", "appearance.samples.insufficient")
    rng = np.random.default_rng(seed)
    data_var = x.var(axis=0)
    floor = np.maximum(_VAR_FLOOR_REL * data_var, _VAR_FLOOR_ABS)

    centers, label = _kmeans_seed(x, n_components, rng)
    weights = np.array([max((label == k).sum(), 1) for k in range(n_components)],
                       dtype=float)
    weights /= weights.sum()
    variances = np.empty((n_components, d))
    for k in range(n_components):
        sel = x[label == k]
        variances[k] = np.maximum(sel.var(axis=0) if len(sel) > 1 else data_var,
                                  floor)
    model = GmmModel(weights, centers.copy(), variances)

    prev = -math.inf
    for _ in range(max_iter):
        # E step
        diff = x[:, None, :] - model.means[None, :, :]
        inv = 1.0 / model.variances[None, :, :]
        logn = (-0.5 * (np.sum(diff * diff * inv, axis=2)
                        + np.sum(np.log(2.0 * math.pi * model.variances),
                                 axis=1)[None, :])
                + np.log(np.maximum(model.weights, 1e-300))[None, :])
        mx = logn.max(axis=1)
        loglik = float(np.sum(mx + np.log(np.sum(np.exp(logn - mx[:, None]),
                                                 axis=1))))
        assert loglik >= prev - 1e-9 * max(1.0, abs(prev)), \
            "EM log-likelihood decreased"
        resp = np.exp(logn - mx[:, None])
        resp /= resp.sum(axis=1, keepdims=True)
        # M step
        nk = resp.sum(axis=0) + 1e-12
        means = (resp.T @ x) / nk[:, None]
        variances = np.empty_like(means)
        for k in range(model.n_components):
            dv = x - means[k]
            variances[k] = np.maximum((resp[:, k][:, None] * dv * dv).sum(axis=0)
                                      / nk[k], floor)
        model = GmmModel(nk / nk.sum(), means, variances)
        if loglik - prev < tol * max(1.0, abs(loglik)) and prev > -math.inf:
            break
        prev = loglik
    return model


def eval_xi(model: GmmModel, image: np.ndarray) -> np.ndarray:
    """Negative log-density of each pixel, clamped to [-XI_CLAMP, XI_CLAMP]."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        flat = img.reshape(-1, 1)
        shape = img.shape
    else:
        flat = img.reshape(-1, img.shape[2])
        shape = img.shape[:2]
    xi = -model.log_density(flat)
    return np.clip(xi, -XI_CLAMP, XI_CLAMP).reshape(shape)


def fit_piecewise_constant(image: np.ndarray, inside_mask: np.ndarray,
                           ) -> PotentialMaps:
    """Potentials from per-region mean colors: squared distance to the mean."""
    img = np.asarray(image, dtype=float)
    mask = np.asarray(inside_mask, dtype=bool)
    if img.shape[:2] != mask.shape:
        raise ValidationError("mask shape does not match the image",
                              "appearance.mask.shape")
    if not mask.any() or mask.all():
        raise ValidationError("both regions must be nonempty",
                              "appearance.region.empty")
    chan = img if img.ndim == 3 else img[:, :, None]
    c1 = chan[mask].mean(axis=0)
    c2 = chan[~mask].mean(axis=0)
    xi1 = np.sum((chan - c1) ** 2, axis=2)
    xi2 = np.sum((chan - c2) ** 2, axis=2)
    return PotentialMaps(xi1=xi1, xi2=xi2)


def region_potentials(image: np.ndarray, inside_mask: np.ndarray, *,
                      kind: str = "gmm", n_components: int = 5,
                      seed: int = 0) -> PotentialMaps:
    """Fit both regions of an image split by a mask and score every pixel."""
    if kind == "pc":
        return fit_piecewise_constant(image, inside_mask)
    if kind != "gmm":
        raise ValidationError(f"unknown appearance model {kind!r}",
                              "appearance.kind")
    img = np.asarray(image, dtype=float)
    chan = img if img.ndim == 3 else img[:, :, None]
    mask = np.asarray(inside_mask, dtype=bool)
    inside = chan[mask].reshape(-1, chan.shape[2])
    outside = chan[~mask].reshape(-1, chan.shape[2])
    m1 = fit_gmm(inside, n_components, seed=seed)
    m2 = fit_gmm(outside, n_components, seed=seed + 1)
    return PotentialMaps(xi1=eval_xi(m1, image), xi2=eval_xi(m2, image))
