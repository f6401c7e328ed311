import numpy as np
import pytest

from visens import bangbang as bb
from visens.errors import ConfigError, DegenerateSlope, InvalidInstance, NotCoercive


def _adj(slopes, switches=None):
    inst = bb.BangBangInstance(16)
    slopes = np.asarray(slopes, dtype=float)
    sw = np.linspace(0.3, 0.7, slopes.size) if switches is None else np.asarray(switches)
    return bb.AdjointData(inst, sw, 1.0, np.full(sw.size, 2.0), np.zeros(17), np.zeros(17),
                          slopes, 0.0, 0)


def test_curvature_form_examples():
    Q = bb.curvature_form(_adj([0.8]))
    assert Q.quad([2.0]) == pytest.approx(1.6)
    assert Q.quad([0.0]) == 0.0
    Q2 = bb.curvature_form(_adj([0.8, 1.1]))
    assert Q2.bilinear([1.0, 0.0], [0.0, 1.0]) == 0.0
    with pytest.raises(DegenerateSlope):
        bb.curvature_form(_adj([1e-4]))


def test_sensitivity_scalar_solve():
    adj = _adj([0.8])
    mu = bb.solve_sensitivity(adj, np.array([[1.0 / 48]]), np.array([0.1]))
    assert mu.weights[0] == pytest.approx(-0.1 / (1.0 / 48 + 0.4), rel=1e-14)
    assert np.all(bb.solve_sensitivity(adj, np.array([[1.0 / 48]]), np.zeros(1)).weights == 0)
    with pytest.raises(NotCoercive):
        bb.solve_sensitivity(adj, np.array([[-1.0]]), np.array([0.1]))


def test_state_examples():
    inst = bb.BangBangInstance(200)
    zero = bb.solve_state_adjoint(inst, np.zeros(199))
    assert np.allclose(zero.y, 0.0) and np.allclose(zero.phi, 0.0)
    one = bb.solve_state_adjoint(inst, bb.nodal_load(inst, np.ones(201)))
    x = inst.x
    assert np.abs(one.y - x * (1 - x) / 2).max() <= 1e-4


def test_manufactured_state_is_second_order():
    errs = []
    for n in (100, 200):
        inst = bb.BangBangInstance(n, f_kind="cubic")
        x = inst.x
        ystar = np.sin(np.pi * x)
        u = np.pi**2 * ystar + ystar**3
        errs.append(np.abs(bb.solve_state_adjoint(inst, bb.nodal_load(inst, u)).y - ystar).max())
    assert errs[1] < errs[0] / 3.0


def test_instance_validation():
    with pytest.raises(ConfigError):
        bb.BangBangInstance(10, f_kind="exp")
    with pytest.raises(InvalidInstance):
        bb.BangBangInstance(10, f_kind="cubic", f_coef=-1.0)


def test_green_oracle_converges():
    errs = [abs(bb.green_second_variation(n) - 1.0 / 48) for n in (250, 500, 1000)]
    assert errs[-1] * 48 < 1e-2
    assert errs[1] <= errs[0] / 2 and errs[2] <= errs[1] / 2
    F2 = bb.second_order_data(bb.find_bangbang_stationary(bb.template_instance(
        "bb-linear-double", grid_n=400)))[0]
    assert np.array_equal(F2, F2.T)


@pytest.mark.parametrize("template, switches", [
    ("bb-linear-single", [0.5]), ("bb-linear-double", [1 / 3, 2 / 3]), ("bb-cubic-single", [0.5])])
def test_templates_are_stationary(template, switches):
    adj = bb.find_bangbang_stationary(bb.template_instance(template, grid_n=1000))
    assert np.allclose(adj.switches, switches, atol=1e-8)
    assert adj.residual <= 1e-10
    inv = bb.check_adjoint_invariants(adj)
    assert inv["zeros_ok"] and inv["slopes_ok"] and inv["sign_ok"] and inv["zero_count_matches"]


def test_sensitivity_is_linear():
    inst = bb.template_instance("bb-linear-single", grid_n=1000)
    adj = bb.find_bangbang_stationary(inst)
    q1, q2 = bb.smooth_direction(inst, 0), bb.smooth_direction(inst, 1)
    F2, j1 = bb.second_order_data(adj, q1)
    j2 = bb.mixed_derivative(adj, q2)
    j12 = bb.mixed_derivative(adj, (q1[0] + q2[0], q1[1] + q2[1]))
    g1 = bb.solve_sensitivity(adj, F2, j1).weights
    g2 = bb.solve_sensitivity(adj, F2, j2).weights
    g12 = bb.solve_sensitivity(adj, F2, j12).weights
    assert np.abs(g12 - g1 - g2).max() <= 1e-12


def test_gradient_and_taylor():
    inst = bb.template_instance("bb-cubic-single", grid_n=400)
    assert bb.gradient_check(inst, samples=10) <= 1e-6
    adj = bb.find_bangbang_stationary(inst)
    d = bb.taylor_defects(adj, np.sin(np.pi * inst.x), t_grid=(1e-1, 1e-2, 1e-3))
    assert abs(d[-1]) < abs(d[0]) and abs(d[-1]) < 1e-3


def test_growth_and_indefinite_instance():
    adj = bb.find_bangbang_stationary(bb.template_instance("bb-linear-single", grid_n=400))
    c, _ = bb.growth_probe(adj, samples=100)
    assert c > 0
    bad = bb.find_bangbang_stationary(
        bb.template_instance("bb-linear-single", grid_n=400, weight=-50.0, amplitude=0.1))
    F2, _ = bb.second_order_data(bad)
    with pytest.raises(NotCoercive) as err:
        bb.solve_sensitivity(bad, F2, np.zeros(1))
    assert err.value.eigenvalue < 0
    c_bad, _ = bb.growth_probe(bad, samples=100)
    assert c_bad < 0


def test_weakstar_and_jump_velocity():
    inst = bb.template_instance("bb-linear-single", grid_n=2000)
    adj = bb.find_bangbang_stationary(inst)
    q = bb.adjoint_shift_direction(adj)
    res = bb.weakstar_fd_check(inst, q, base=adj)
    assert res["passed"], res["items"]
    g = res["measure"]["atoms"][0][1]
    # at a switch from +1 to -1 a negative atom means the switch moves left
    assert g < 0 and res["rows"][-1]["switches"][0] < 0.5


def test_weakstar_zero_direction():
    inst = bb.template_instance("bb-linear-single", grid_n=500)
    zero = (np.zeros(501), np.zeros(501))
    res = bb.weakstar_fd_check(inst, zero, t_grid=(1e-2, 1e-3))
    assert all(r["max_gap"] == 0.0 for r in res["rows"])
