"""Property-based checks of structural identities."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from visens.derivative import solve_derivative_vi
from visens.functionals import Box, ScaledL1
from visens.subderiv import q_polyhedric

vec3 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=50, deadline=None)
@given(vec3, st.floats(0.0, 5.0))
def test_derivative_is_positively_homogeneous(q, scale):
    Q = q_polyhedric(Box([-1, -1, -1], [1, 1, 1]), None, [1.0, -1.0, 0.2], [1.0, 0.0, 0.0])
    Ax = np.array([[2.0, 0.5, 0.0], [-0.5, 2.0, 0.3], [0.0, -0.3, 1.5]])
    q = np.asarray(q)
    y1 = solve_derivative_vi(-np.eye(3), Ax, Q, q).y
    y2 = solve_derivative_vi(-np.eye(3), Ax, Q, scale * q).y
    assert np.allclose(y2, scale * y1, atol=1e-9 * (1 + scale))


@settings(max_examples=100, deadline=None)
@given(vec3, vec3, st.floats(0.05, 3.0))
def test_prox_is_firmly_nonexpansive(a, b, sigma):
    j = ScaledL1([0.5, 1.0, 2.0])
    a, b = np.asarray(a), np.asarray(b)
    pa, pb = j.prox(a, sigma), j.prox(b, sigma)
    assert float((pa - pb) @ (a - b)) >= float((pa - pb) @ (pa - pb)) - 1e-12
