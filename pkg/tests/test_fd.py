import numpy as np

from visens.core import affine_problem
from visens.derivative import solve_derivative_vi
from visens.fd import richardson, run_ray, verify_convergence
from visens.functionals import Box, ScaledL1
from visens.subderiv import catalog_subderivative


def _box_setup():
    prob = affine_problem(np.eye(2), nonsmooth=Box([-1, -1], [1, 1]))
    p0, q = np.array([2.0, 0.5]), np.array([1.0, 1.0])
    return prob, p0, q


def test_box_ray_is_exact():
    prob, p0, q = _box_setup()
    rep = run_ray(prob, p0, q)
    for y in rep.quotients:
        assert np.allclose(y, [0.0, 1.0], atol=1e-9)


def test_zero_direction_quotients_vanish():
    prob, p0, _ = _box_setup()
    rep = run_ray(prob, p0, np.zeros(2))
    assert all(np.allclose(y, 0.0) for y in rep.quotients)


def test_soft_threshold_ray():
    prob = affine_problem(np.eye(1), nonsmooth=ScaledL1([1.0]))
    rep = run_ray(prob, np.array([0.5]), np.array([1.0]))
    assert all(abs(y[0]) < 1e-9 for y in rep.quotients)


def test_verify_convergence_box_and_negated():
    prob, p0, q = _box_setup()
    rep = run_ray(prob, p0, q)
    x0, a0 = rep.x_bar0, rep.a0
    Q = catalog_subderivative(prob.nonsmooth, x0, a0)
    sol = solve_derivative_vi(prob.Ap(p0, x0), prob.Ax(p0, x0), Q, q)
    verdict = verify_convergence(rep, sol, Q, prob.Ax(p0, x0))
    assert verdict["passed"] and verdict["final_error"] < 1e-9
    sol.y = -sol.y
    assert not verify_convergence(rep, sol, Q, prob.Ax(p0, x0))["passed"]


def test_richardson_removes_linear_term():
    t = np.array([1e-1, 1e-2, 1e-3])
    assert abs(richardson(t, 2.0 + 3.0 * t) - 2.0) < 1e-10
