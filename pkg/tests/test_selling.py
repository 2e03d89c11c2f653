import numpy as np
import pytest

from geokonvex.selling import decompose2, decompose3, relaxed_tensor


def test_axis_case_2d():
    dec = decompose2(np.array([1.0, 0.0]), 0.1)
    got = {tuple(o): w for w, o in zip(dec.weights, dec.offsets)}
    assert got[(1, 0)] == pytest.approx(1.0)
    assert got[(0, 1)] == pytest.approx(0.01)
    # third offset carries no weight in the axis-aligned case
    assert sorted(dec.weights)[0] == pytest.approx(0.0, abs=1e-15)
    assert len(dec.weights) == 3


def test_axis_case_3d():
    dec = decompose3(np.array([1.0, 0.0, 0.0]), 0.1)
    got = {tuple(o): w for w, o in zip(dec.weights, dec.offsets)}
    assert got[(1, 0, 0)] == pytest.approx(1.0)
    assert got[(0, 1, 0)] == pytest.approx(0.01)
    assert got[(0, 0, 1)] == pytest.approx(0.01)
    assert len(dec.weights) == 6


def test_halfspace_form_diagonal_case():
    dec = decompose3(np.array([1.0, 0.0, 0.0]), 0.1)
    assert dec.halfspace_form(np.array([1.0, 0.0, 0.0])) == pytest.approx(1.0)


def test_halfspace_form_example_2d():
    dec = decompose2(np.array([1.0, 1.0]), 0.1)
    w = np.array([1.0, 1.0])
    exact = max(0.0, float(w @ np.array([1.0, 1.0]))) ** 2
    assert dec.halfspace_form(w) == pytest.approx(exact, abs=0.01 * 2.0 * 4.0)


@pytest.mark.parametrize("dim,decompose", [(2, decompose2), (3, decompose3)])
def test_reconstruction_identity(dim, decompose):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        v = rng.normal(size=dim)
        v /= np.linalg.norm(v)
        dec = decompose(v, 0.1)
        worst = max(worst, float(np.abs(dec.reconstruct()
                                        - relaxed_tensor(v, 0.1)).max()))
        assert np.all(dec.weights >= 0.0)
        # positive-weight offsets point along v
        for wgt, off in zip(dec.weights, dec.offsets):
            if wgt > 0.0:
                assert float(off @ v) >= 0.0
    assert worst <= 1e-10


@pytest.mark.parametrize("decompose,dim", [(decompose2, 2), (decompose3, 3)])
def test_second_order_epsilon_convergence(decompose, dim):
    rng = np.random.default_rng(11)
    errs = {}
    for eps in (0.1, 0.05):
        total = 0.0
        for _ in range(400):
            v = rng.normal(size=dim)
            v /= np.linalg.norm(v)
            w = rng.normal(size=dim)
            w /= np.linalg.norm(w)
            dec = decompose(v, eps)
            total += abs(dec.halfspace_form(w)
                         - max(0.0, float(w @ v)) ** 2)
        errs[eps] = total / 400.0
    assert errs[0.1] / errs[0.05] >= 2.5


def test_homogeneity():
    rng = np.random.default_rng(5)
    for _ in range(50):
        v = rng.normal(size=3)
        c = float(rng.uniform(0.5, 3.0))
        d1 = decompose3(v, 0.1)
        d2 = decompose3(c * v, 0.1)
        assert np.array_equal(d1.offsets, d2.offsets)
        np.testing.assert_allclose(d2.weights, c * c * d1.weights,
                                   rtol=1e-10, atol=1e-12)


def test_bad_inputs():
    with pytest.raises(ValueError):
        decompose3(np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        decompose3(np.array([1.0, 0.0, 0.0]), 1.5)
    with pytest.raises(ValueError):
        decompose2(np.array([1.0, 0.0, 0.0]), 0.1)
