import numpy as np
import pytest

from visens.errors import InvalidInstance
from visens.plasticity import (build_instance, lipschitz_batches, plasticity_derivative,
                               random_instance, scaled_load, solve_plasticity)


def _one_cell():
    return build_instance({"D": [[1.0]], "A": [[1.0]], "B": [[1.0]], "weights": [1.0]},
                          validate=False)


@pytest.mark.parametrize("ell, sigma, u", [(0.5, 0.5, -0.5), (1.0, 1.0, -1.0), (0.0, 0.0, 0.0)])
def test_one_cell_solutions(ell, sigma, u):
    S, U, lam = solve_plasticity(_one_cell(), [ell])
    assert S[0] == pytest.approx(sigma, abs=1e-12)
    assert U[0] == pytest.approx(u, abs=1e-12)
    # lambda = -1 - u on the active branch; it is zero at ell = 1
    assert lam[0] == pytest.approx(0.0, abs=1e-12)


def test_build_instance_validation():
    with pytest.raises(InvalidInstance) as err:
        build_instance({"D": [[1.0]], "A": [[1.0]], "B": [[1.0]], "weights": [1.0]})
    assert err.value.invariant == "B_surjective_on_H"
    build_instance({"D": [[1.0, 0.0]], "A": np.eye(2).tolist(), "B": [[0.0, 1.0]], "cells": 1})
    with pytest.raises(InvalidInstance):
        build_instance({"D": [[1.0, 0.0]], "A": [[1.0, 0.0], [0.0, 0.0]], "B": [[0.0, 1.0]],
                        "cells": 1})


def test_zero_direction_gives_zero_derivative():
    inst = random_instance(1, cells=4)
    S, U, lam = solve_plasticity(inst, scaled_load(inst, 1))
    T, up, _ = plasticity_derivative(inst, S, U, lam, np.zeros(inst.dim_V))
    assert np.allclose(T, 0.0) and np.allclose(up, 0.0)


def test_elastic_regime_matches_linear_solve():
    inst = random_instance(2, cells=4)
    ell = scaled_load(inst, 2, target=0.2)
    S, U, lam = solve_plasticity(inst, ell)
    assert np.all(lam == 0.0)
    dell = np.random.default_rng(0).standard_normal(inst.dim_V)
    T, up, _ = plasticity_derivative(inst, S, U, lam, dell)
    k = inst.dim_V
    K = np.block([[inst.A, inst.B.T], [inst.B, np.zeros((k, k))]])
    ref = np.linalg.solve(K, np.concatenate([np.zeros(inst.dim), dell]))
    assert np.allclose(T, ref[:inst.dim], atol=1e-10)


def test_derivative_matches_difference_quotient():
    inst = random_instance(5, cells=6)
    ell = scaled_load(inst, 5)
    S, U, lam = solve_plasticity(inst, ell)
    assert np.any(lam > 0)
    dell = np.random.default_rng(1).standard_normal(inst.dim_V)
    T, up, _ = plasticity_derivative(inst, S, U, lam, dell)
    t = 1e-6
    St, Ut, _ = solve_plasticity(inst, ell + t * dell)
    assert np.linalg.norm((St - S) / t - T) <= 1e-5 * (1 + np.linalg.norm(T))
    assert np.linalg.norm((Ut - U) / t - up) <= 1e-5 * (1 + np.linalg.norm(up))


def test_kkt_multiplier_relation():
    inst = random_instance(7, cells=5)
    S, U, lam = solve_plasticity(inst, scaled_load(inst, 7))
    xi = inst.xi(S, lam)
    # stationarity A Sigma + B^T u + Xi = 0
    assert np.linalg.norm(inst.A @ S + inst.B.T @ U + xi) <= 1e-9


def test_lipschitz_batches_are_finite():
    inst = random_instance(3, cells=4)
    vals = lipschitz_batches(inst, scaled_load(inst, 3), batches=3, per_batch=5)
    assert all(np.isfinite(v) and v > 0 for v in vals)
