import numpy as np
import pytest

from geokonvex.appearance import (GmmModel, eval_xi, fit_gmm,
                                  fit_piecewise_constant, region_potentials)
from geokonvex.errors import ValidationError


def test_constant_pixels_single_component():
    model = fit_gmm(np.full(50, 0.3), 1)
    assert model.means[0, 0] == pytest.approx(0.3)
    assert model.variances[0, 0] == pytest.approx(1e-10)
    assert model.weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_two_cluster_recovery():
    rng = np.random.default_rng(0)
    samples = np.concatenate([rng.normal(0.2, 0.01, 400),
                              rng.normal(0.8, 0.01, 400)])
    model = fit_gmm(samples, 2)
    means = np.sort(model.means[:, 0])
    assert abs(means[0] - 0.2) < 0.02
    assert abs(means[1] - 0.8) < 0.02
    assert model.weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_overparameterized_fit_keeps_invariants():
    rng = np.random.default_rng(1)
    samples = np.round(rng.random(120) * 2) / 2.0  # three distinct values
    model = fit_gmm(samples, 5)
    assert model.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(model.weights >= 0.0)
    assert np.all(model.variances > 0.0)


def test_too_few_samples():
    with pytest.raises(ValidationError):
        fit_gmm(np.arange(5, dtype=float), 3)


def test_eval_xi_peak_and_clamp():
    model = GmmModel(weights=np.array([1.0]), means=np.array([[0.5]]),
                     variances=np.array([[0.01]]))
    img = np.full((4, 4), 0.5)
    xi = eval_xi(model, img)
    expected = -float(model.log_density(np.array([[0.5]]))[0])
    assert xi[0, 0] == pytest.approx(expected)
    outlier = np.full((2, 2), 500.0)
    assert np.all(eval_xi(model, outlier) == 50.0)
    # higher likelihood means smaller xi
    near = eval_xi(model, np.full((1, 1), 0.52))
    far = eval_xi(model, np.full((1, 1), 0.7))
    assert near[0, 0] < far[0, 0]


def test_piecewise_constant_examples():
    img = np.zeros((8, 8))
    mask = np.zeros((8, 8), dtype=bool)
    mask[:, :4] = True
    img[mask] = 1.0
    pots = fit_piecewise_constant(img, mask)
    assert np.all(pots.xi1[mask] == 0.0)
    assert np.all(pots.xi2[~mask] == 0.0)
    swapped = fit_piecewise_constant(img, ~mask)
    np.testing.assert_allclose(swapped.xi1, pots.xi2)
    np.testing.assert_allclose(swapped.xi2, pots.xi1)
    flat = fit_piecewise_constant(np.full((8, 8), 0.5), mask)
    assert np.all(flat.xi1 == 0.0) and np.all(flat.xi2 == 0.0)
    with pytest.raises(ValidationError):
        fit_piecewise_constant(img, np.zeros((8, 8), dtype=bool))


def test_piecewise_constant_minimizes_squared_error():
    rng = np.random.default_rng(2)
    img = rng.random((6, 6))
    mask = rng.random((6, 6)) < 0.5
    mask[0, 0] = True
    mask[-1, -1] = False
    pots = fit_piecewise_constant(img, mask)
    best = img[mask].mean()
    inside_err = np.sum((img[mask] - best) ** 2)
    for cand in np.linspace(0, 1, 101):
        assert inside_err <= np.sum((img[mask] - cand) ** 2) + 1e-12
    assert np.sum(pots.xi1[mask]) == pytest.approx(inside_err)


def test_region_potentials_separate_synthetic_regions():
    rng = np.random.default_rng(3)
    img = np.where(np.arange(40)[None, :] < 20, 0.25, 0.75) \
        + 0.02 * rng.standard_normal((40, 40))
    mask = np.zeros((40, 40), dtype=bool)
    mask[:, :20] = True
    pots = region_potentials(img, mask, kind="gmm", n_components=2)
    assert pots.xi1[mask].mean() < pots.xi2[mask].mean()
    assert pots.xi2[~mask].mean() < pots.xi1[~mask].mean()
