import itertools

import numpy as np
import pytest

from visens.core import affine_problem, solve_elliptic_vi, vi_residual
from visens.functionals import Box, ScaledL1


def test_box_projection_example():
    prob = affine_problem(np.eye(2), nonsmooth=Box([-1, -1], [1, 1]))
    sol = solve_elliptic_vi(prob, np.array([2.0, 0.5]))
    assert np.allclose(sol.x_bar, [1.0, 0.5], atol=1e-12)


def test_soft_threshold_example():
    prob = affine_problem(np.eye(1), nonsmooth=ScaledL1([1.0]))
    sol = solve_elliptic_vi(prob, np.array([0.5]))
    assert abs(sol.x_bar[0]) < 1e-12


def _kkt_enumeration(M, p):
    n = p.size
    for pattern in itertools.product((0, 1, 2), repeat=n):
        x = np.zeros(n)
        free = [i for i in range(n) if pattern[i] == 2]
        fixed = [i for i in range(n) if pattern[i] != 2]
        x[fixed] = [float(pattern[i]) for i in fixed]
        if free:
            x[free] = np.linalg.solve(M[np.ix_(free, free)], p[free] - M[np.ix_(free, fixed)] @ x[fixed])
        if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
            continue
        r = M @ x - p
        if all((pattern[i] == 0 and r[i] >= -1e-10) or (pattern[i] == 1 and r[i] <= 1e-10)
               for i in fixed):
            return x
    raise AssertionError("no KKT point found")


def test_box_qp_against_active_set_enumeration(rng):
    for _ in range(20):
        R = rng.standard_normal((3, 3))
        M = R @ R.T + np.eye(3)
        p = 2 * rng.standard_normal(3)
        sol = solve_elliptic_vi(affine_problem(M, nonsmooth=Box(np.zeros(3), np.ones(3))), p,
                                tol=1e-13)
        assert np.allclose(sol.x_bar, _kkt_enumeration(M, p), atol=1e-10)


def test_vi_residual_examples():
    prob = affine_problem(np.eye(2), nonsmooth=Box([-1, -1], [1, 1]))
    p = np.array([0.2, -0.3])
    assert vi_residual(prob, p, p) == 0.0
    xbar = solve_elliptic_vi(prob, np.array([2.0, 0.5])).x_bar
    assert vi_residual(prob, np.array([2.0, 0.5]), xbar) <= 1e-10
    assert vi_residual(prob, np.array([2.0, 0.5]), xbar + [0.0, 0.1]) > 0.0


def test_self_check_detects_wrong_jacobian():
    from visens.errors import InvalidInstance
    prob = affine_problem(np.eye(2), nonsmooth=Box([-1, -1], [1, 1]))
    prob.operator_jac_p = lambda p, x: np.eye(2)
    with pytest.raises(InvalidInstance):
        prob.self_check(np.zeros(2), np.zeros(2))
