import numpy as np

from visens.cones import AtomCone, PolyhedralCone


def test_membership_and_projection():
    cone = PolyhedralCone(2, eq=[[1.0, 0.0]], ineq=[[0.0, 1.0]])
    assert cone.contains([0.0, -1.0])
    assert not cone.contains([0.0, 1.0])
    assert not cone.contains([1.0, -1.0])
    assert np.allclose(cone.project([3.0, 2.0]), [0.0, 0.0])
    assert np.allclose(cone.project([3.0, -2.0]), [0.0, -2.0])


def test_cone_contains_zero_and_samples_inside(rng):
    cone = PolyhedralCone(3, ineq=[[1.0, 1.0, 0.0], [0.0, -1.0, 1.0]])
    assert cone.contains(np.zeros(3))
    Z = cone.sample(rng, 200)
    assert Z.shape == (200, 3)
    assert np.all(cone.contains_rows(Z, tol=1e-9))


def test_span_basis_detects_implicit_equalities():
    # z1 <= 0 and -z1 <= 0 force z1 = 0
    cone = PolyhedralCone(2, ineq=[[1.0, 0.0], [-1.0, 0.0]])
    N = cone.span_basis()
    assert N.shape == (2, 1)
    assert abs(N[0, 0]) < 1e-12


def test_subspace_kind():
    assert PolyhedralCone(2, eq=[[1.0, 0.0]]).kind == "subspace"
    assert PolyhedralCone(2, ineq=[[1.0, 0.0]]).kind == "polyhedral"
    assert AtomCone([0.3, 0.6]).kind == "atoms_at_points"
