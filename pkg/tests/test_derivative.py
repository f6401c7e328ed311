import numpy as np
import pytest

from visens.cones import PolyhedralCone
from visens.derivative import check_necessary_conditions, solve_derivative_vi
from visens.functionals import Box
from visens.subderiv import QuadraticSubderivative, q_polyhedric


def _box_face():
    return q_polyhedric(Box([-1, -1], [1, 1]), None, [1.0, 0.5], [2.0, 0.0])


def test_box_face_derivative():
    # A(p, x) = x - p, so A_p = -I and the derivative is the projection of q onto the cone
    sol = solve_derivative_vi(-np.eye(2), np.eye(2), _box_face(), np.array([1.0, 1.0]))
    assert np.allclose(sol.y, [0.0, 1.0], atol=1e-12)


def test_zero_direction():
    sol = solve_derivative_vi(-np.eye(2), np.eye(2), _box_face(), np.zeros(2))
    assert np.allclose(sol.y, 0.0) and sol.q_value == 0.0
    rep = check_necessary_conditions(sol, _box_face(), -np.eye(2), np.eye(2))
    assert rep["value_identity_gap"] == 0.0


def test_scalar_quadratic():
    Q = QuadraticSubderivative(PolyhedralCone(1), np.array([[0.3]]), np.zeros(1), np.zeros(1))
    sol = solve_derivative_vi(np.eye(1), np.eye(1), Q, np.array([1.0]))
    assert sol.y[0] == pytest.approx(-1.0 / 1.3, abs=1e-14)


def test_necessary_conditions_hold_and_detect_perturbation():
    Q = _box_face()
    sol = solve_derivative_vi(-np.eye(2), np.eye(2), Q, np.array([1.0, 1.0]))
    rep = check_necessary_conditions(sol, Q, -np.eye(2), np.eye(2))
    assert rep["min_value"] >= -1e-8 and rep["cone_membership"]
    sol.y = sol.y + 0.1 * np.array([0.0, 1.0])
    bad = check_necessary_conditions(sol, Q, -np.eye(2), np.eye(2))
    assert bad["min_value"] < -1e-3


def test_nonsymmetric_polyhedral_cone(rng):
    cone = PolyhedralCone(3, ineq=[[1.0, 0.0, 0.0], [0.0, 1.0, -1.0]])
    Q = QuadraticSubderivative(cone, np.diag([0.5, 0.0, 0.2]), np.zeros(3), np.zeros(3))
    Ax = np.eye(3) + np.array([[0.0, 0.4, 0.0], [-0.4, 0.0, 0.3], [0.0, -0.3, 0.0]])
    for _ in range(5):
        q = rng.standard_normal(3)
        sol = solve_derivative_vi(np.eye(3), Ax, Q, q)
        rep = check_necessary_conditions(sol, Q, np.eye(3), Ax)
        assert rep["min_value"] >= -1e-8
        assert rep["value_identity_gap"] <= 1e-8
