import numpy as np
import pytest

from visens.errors import OutsideEnlargement, SetValued
from visens.proxreg import (ball_complement, convex_set, lipschitz_probe, project,
                            prox_regularity_check, recast_inequality_check,
                            segment_differentiability_check)


def test_projection_examples():
    K = ball_complement(1.0)
    assert np.allclose(project(K, [0.5, 0.0]), [1.0, 0.0])
    assert np.allclose(project(K, [2.0, 0.0]), [2.0, 0.0])
    with pytest.raises((SetValued, OutsideEnlargement)):
        project(K, [0.0, 0.0])


@pytest.mark.parametrize("rho", [0.25, 0.5, 0.75])
def test_lipschitz_rank(rho):
    K = ball_complement(1.0)
    assert lipschitz_probe(K, rho, pairs=2000, seed=1) <= 1.0 / (1.0 - rho) + 1e-6


def test_lipschitz_rank_is_nearly_attained():
    assert lipschitz_probe(ball_complement(1.0), 0.9, pairs=5000, seed=0) > 5.0


def test_convex_projection_is_nonexpansive():
    K = convex_set("box", {"lower": [-1.0, -1.0], "upper": [1.0, 1.0]}, 2)
    assert lipschitz_probe(K, 0.5, pairs=2000) <= 1.0 + 1e-6


def test_hypomonotonicity_and_recast():
    K = ball_complement(1.0)
    assert prox_regularity_check(K, triples=2000) >= -1e-9
    assert recast_inequality_check(K, 0.5, samples=2000) >= -1e-9


def test_segment_differentiability_and_tangential_derivative():
    K = ball_complement(1.0)
    res = segment_differentiability_check(K, [1.0, 0.0], [-1.0, 0.0], [0.25, 0.5, 0.75])
    assert res["agree"] and res["differentiable"]
    for rho in (0.25, 0.5, 0.75):
        p = np.array([1.0 - rho, 0.0])
        t = 1e-6
        d = (project(K, p + t * np.array([0.0, 1.0])) - project(K, p)) / t
        assert d[1] == pytest.approx(1.0 / (1.0 - rho), rel=1e-5)
