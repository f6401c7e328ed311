import numpy as np
import pytest
from scipy.optimize import minimize

from visens.functionals import (BallComplement, Box, HalfSquaredNormPlus, PointwiseBall,
                                Polyhedron, ScaledL1, from_config)


def _prox_objective(j, v, sigma):
    return lambda z: sigma * j(z) + 0.5 * float((z - v) @ (z - v))


@pytest.mark.parametrize("j", [
    Box([-1.0, -0.5], [1.0, 2.0]),
    ScaledL1([0.5, 1.0]),
    Polyhedron([[1.0, 1.0], [-1.0, 0.0]], [1.0, 0.5]),
    PointwiseBall(np.array([[1.0, 0.5], [0.0, 2.0]]), 1),
])
def test_prox_is_minimizer(j, rng):
    for _ in range(200):
        v = 3.0 * rng.standard_normal(2)
        sigma = float(rng.uniform(0.1, 2.0))
        z = j.prox(v, sigma)
        obj = _prox_objective(j, v, sigma)
        fz = obj(z)
        assert np.isfinite(fz)
        for _ in range(5):
            w = z + 1e-3 * rng.standard_normal(2)
            w = j.restore(w[None, :])[0]
            assert fz <= obj(w) + 1e-8


def test_soft_threshold_closed_form():
    j = ScaledL1([1.0])
    assert j.prox(np.array([0.5]), 1.0)[0] == 0.0
    assert j.prox(np.array([2.5]), 1.0)[0] == pytest.approx(1.5)


def test_scaled_l1_against_scalar_minimizer(rng):
    j = ScaledL1([0.7, 1.3])
    for _ in range(20):
        v = 2 * rng.standard_normal(2)
        z = j.prox(v, 0.8)
        for i in range(2):
            ref = minimize(lambda s: 0.8 * j.weights[i] * abs(s[0]) + 0.5 * (s[0] - v[i]) ** 2,
                           [v[i]], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14}).x[0]
            assert z[i] == pytest.approx(ref, abs=1e-6)


def test_ball_complement_prox():
    j = BallComplement(1.0)
    assert np.allclose(j.prox(np.array([0.5, 0.0])), [1.0, 0.0])
    assert np.allclose(j.prox(np.array([2.0, 0.0])), [2.0, 0.0])
    with pytest.raises(ValueError):
        j.prox(np.zeros(2))


def test_half_squared_norm_plus_prox():
    j = HalfSquaredNormPlus(Box([0.0], [1.0]))
    # argmin sigma/2 z^2 + 1/2 (z - v)^2 on [0, 1] is clip(v / (1 + sigma))
    assert j.prox(np.array([3.0]), 1.0)[0] == pytest.approx(1.0)
    assert j.prox(np.array([1.0]), 1.0)[0] == pytest.approx(0.5)


def test_polyhedron_restore_is_projection(rng):
    j = Polyhedron([[1.0, 1.0], [-1.0, 2.0]], [1.0, 1.0])
    X = 3 * rng.standard_normal((50, 2))
    R = j.restore(X)
    for x, r in zip(X, R):
        assert np.allclose(r, j.prox(x), atol=1e-9)


def test_from_config_roundtrip():
    j = from_config({"kind": "indicator_box", "lower": [0, 0], "upper": [1, 1]})
    assert j(np.array([0.5, 0.5])) == 0.0
    assert j(np.array([1.5, 0.5])) == np.inf
    with pytest.raises(ValueError):
        from_config({"kind": "nope"})
