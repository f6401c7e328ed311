import itertools

import numpy as np
import pytest

from visens.qp import project_polyhedron, solve_qp


def _box_bruteforce(H, f, lo, hi):
    """Enumerate all 3^n active patterns of a box QP and keep the KKT point."""
    n = f.size
    best = None
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        x = np.zeros(n)
        fixed = [i for i in range(n) if pattern[i] != 0]
        free = [i for i in range(n) if pattern[i] == 0]
        for i in fixed:
            x[i] = lo[i] if pattern[i] < 0 else hi[i]
        if free:
            rhs = -f[free] - H[np.ix_(free, fixed)] @ x[fixed]
            x[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            continue
        grad = H @ x + f
        ok = all((pattern[i] < 0 and grad[i] >= -1e-10) or (pattern[i] > 0 and grad[i] <= 1e-10)
                 for i in fixed)
        if ok:
            best = x
    return best


def test_box_qp_matches_enumeration(rng):
    for _ in range(60):
        R = rng.standard_normal((3, 3))
        H = R @ R.T + 0.5 * np.eye(3)
        f = 2.0 * rng.standard_normal(3)
        lo, hi = np.zeros(3), np.ones(3)
        G = np.vstack([np.eye(3), -np.eye(3)])
        h = np.concatenate([hi, -lo])
        res = solve_qp(H, f, G=G, h=h)
        ref = _box_bruteforce(H, f, lo, hi)
        assert np.allclose(res.x, ref, atol=1e-10)


def test_equality_constrained_qp():
    res = solve_qp(np.eye(2), np.zeros(2), E=[[1.0, 1.0]], e=[1.0])
    assert np.allclose(res.x, [0.5, 0.5])
    assert np.allclose(res.eq_multipliers, [-0.5])


def test_projection_onto_halfspace():
    res = project_polyhedron(np.array([2.0, 2.0]), np.array([[1.0, 1.0]]), np.array([1.0]))
    assert np.allclose(res.x, [0.5, 0.5])
    assert res.active[0]


def test_infeasible_raises():
    from visens.errors import Infeasible
    G = np.array([[1.0], [-1.0]])
    with pytest.raises(Infeasible):
        solve_qp(np.eye(1), np.zeros(1), G=G, h=np.array([-1.0, -1.0]))
