import numpy as np
import pytest

from visens.cones import PolyhedralCone
from visens.errors import NotNormal
from visens.functionals import Box
from visens.subderiv import (QuadraticSubderivative, catalog_subderivative, q_ball_complement,
                             q_bruteforce_oracle, q_elastoplastic, q_one_norm, q_polyhedric,
                             q_prox_regular_shift)


def test_box_face_cone():
    Q = q_polyhedric(Box([-1, -1], [1, 1]), None, [1.0, 0.5], [2.0, 0.0])
    assert Q.is_zero
    assert Q.cone.contains([0.0, 3.0]) and Q.cone.contains([0.0, -3.0])
    assert not Q.cone.contains([-1.0, 0.0])


def test_box_interior_is_whole_space():
    Q = q_polyhedric(Box([-1, -1], [1, 1]), None, [0.0, 0.0], [0.0, 0.0])
    assert Q.cone.kind == "subspace"
    assert Q.cone.eq.shape[0] == 0


def test_simplex_vertex_with_wrong_slope_is_not_normal():
    G = np.vstack([-np.eye(3), np.ones((1, 3)), -np.ones((1, 3))])
    h = np.array([0.0, 0.0, 0.0, 1.0, -1.0])
    with pytest.raises(NotNormal):
        q_polyhedric(G, h, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])


def test_elastoplastic_single_cell():
    Q = q_elastoplastic([[1.0]], [1.0], [1.0], [0.3])
    assert Q.extra["lam"][0] == pytest.approx(0.3)
    assert Q.quad([2.0]) == pytest.approx(0.3 * 4.0)


def test_elastoplastic_inactive_cell():
    Q = q_elastoplastic([[1.0]], [1.0], [0.5], [0.0])
    assert Q.extra["lam"][0] == 0.0
    assert Q.cone.kind == "subspace" and Q.is_zero


def test_elastoplastic_recovers_multipliers(rng):
    D = rng.standard_normal((2, 3))
    S = rng.standard_normal((2, 3))
    S[0] /= np.linalg.norm(D @ S[0])
    S[1] *= 0.5 / np.linalg.norm(D @ S[1])
    lam = np.array([0.7, 0.0])
    X = np.array([lam[i] * D.T @ D @ S[i] for i in range(2)])
    Q = q_elastoplastic(D, [1.0, 1.0], S.ravel(), X.ravel())
    assert np.allclose(Q.extra["lam"], lam, atol=1e-12)


def test_prox_regular_shift_examples():
    base = QuadraticSubderivative(PolyhedralCone(1), np.array([[0.3]]), np.zeros(1), np.zeros(1))
    shifted = q_prox_regular_shift(base)
    assert shifted.quad([2.0]) == pytest.approx(5.2)
    assert shifted.quad([0.0]) == 0.0
    zero = QuadraticSubderivative(PolyhedralCone(2), np.zeros((2, 2)), np.zeros(2), np.zeros(2))
    assert q_prox_regular_shift(zero).quad([1.0, 2.0]) == pytest.approx(5.0)


def test_one_norm_cone():
    Q = q_one_norm([1.0, 1.0, 1.0], [0.0, 0.0, 2.0], [0.5, 1.0, 1.0])
    assert Q.cone.contains([0.0, 1.0, -4.0])
    assert not Q.cone.contains([1.0, 0.0, 0.0])
    assert not Q.cone.contains([0.0, -1.0, 0.0])


def test_ball_complement_curvature():
    Q = q_ball_complement(1.0, [1.0, 0.0], [-2.0, 0.0])
    assert Q.quad([0.0, 1.0]) == pytest.approx(-2.0)
    assert Q.value([1.0, 0.0]) == np.inf


def test_oracle_box_examples():
    j = Box([-1.0], [1.0])
    assert q_bruteforce_oracle(j, np.array([1.0]), np.array([1.0]), np.array([-1.0])) == np.inf
    assert q_bruteforce_oracle(j, np.array([1.0]), np.array([1.0]), np.array([0.0])) == 0.0


def test_oracle_matches_box_catalog():
    j = Box([-1.0, -1.0], [1.0, 1.0])
    x, g = np.array([1.0, 0.3]), np.array([1.5, 0.0])
    Q = catalog_subderivative(j, x, g)
    for z in ([0.0, 1.0], [-0.5, 0.2]):
        assert q_bruteforce_oracle(j, x, g, np.array(z)) == pytest.approx(Q.value(np.array(z), tol=1e-7))
