import numpy as np
import pytest

from barrierbilevel import polytope as poly
from barrierbilevel.benchmarks import toll
from barrierbilevel.diagnostics import finite_difference_gradient
from barrierbilevel.errors import InvalidParameter


@pytest.mark.parametrize("n,m_b", [(10, 5), (50, 5), (59, 5), (60, 6), (100, 10), (1200, 120)])
def test_bottleneck_count(n, m_b):
    assert toll.bottleneck_count(n) == m_b


def test_generator_invariants_small_grid():
    for seed in range(10):
        ti = toll.generate_toll_instance(30, seed, 0.2)
        assert ti.C.shape == (5, 30)
        assert set(np.unique(ti.C)) <= {0.0, 1.0}
        assert np.all(ti.C.sum(axis=1) >= 1)
        assert np.all((ti.C.sum(axis=0) >= 1) & (ti.C.sum(axis=0) <= 3))
        assert ti.D == pytest.approx(0.6 * ti.u.sum())
        assert ti.y_int.sum() < 0.5 * ti.D
        assert np.all(ti.C @ ti.y_int < ti.tau * ti.d)
        r = ti.C @ ti.u
        assert np.all(ti.d >= 0.45 * r - 1e-12)
        assert ti.R_tar == pytest.approx(0.25 * ti.D * 0.5)
        assert (ti.kappa, ti.beta, ti.rho_rev, ti.rho_x) == (1.0, 1.0, 1e-2, 1e-3)


def test_small_tau_lifts_capacities():
    ti = toll.generate_toll_instance(20, 3, 0.01)
    c = ti.C @ ti.y_int
    np.testing.assert_allclose(ti.d, np.maximum(ti.d, (1.35 * c + 1e-3) / 0.01))
    assert np.all(ti.tau * ti.d - c >= 1e-3 / 1.35 - 1e-12)


def test_determinism_and_json_roundtrip():
    a = toll.generate_toll_instance(40, 11, 0.3)
    b = toll.generate_toll_instance(40, 11, 0.3)
    c = toll.TollInstance.from_json(a.to_json())
    for name in ("C", "u", "ell", "q", "d", "V", "x0", "y_int"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        np.testing.assert_array_equal(getattr(a, name), getattr(c, name))
    assert a.D == c.D and a.seed == c.seed
    assert not np.array_equal(a.u, toll.generate_toll_instance(40, 12, 0.3).u)


@pytest.mark.parametrize("bad", [dict(n=5), dict(tau=0.0), dict(tau=1.5)])
def test_generator_rejects_bad_parameters(bad):
    args = dict(n=20, seed=0, tau=0.2)
    args.update(bad)
    with pytest.raises(InvalidParameter):
        toll.generate_toll_instance(**args)


def test_instance_oracles_match_fd(rng):
    ti = toll.generate_toll_instance(12, 0, 0.2)
    P, inst = toll.toll_bilevel_instance(ti)
    assert P.m == 2 * 12 + 5 + 1
    x = rng.uniform(0, 2, 12)
    y = ti.y_int
    for val, grad, wrt in ((inst.f_value, inst.f_grad_y, "y"), (inst.f_value, inst.f_grad_x, "x"),
                           (inst.g_value, inst.g_grad_y, "y"), (inst.g_value, inst.g_grad_x, "x")):
        if wrt == "y":
            fd = finite_difference_gradient(lambda v: val(x, v), y)
            np.testing.assert_allclose(grad(x, y), fd, rtol=1e-5, atol=1e-7)
        else:
            fd = finite_difference_gradient(lambda v: val(v, y), x)
            np.testing.assert_allclose(grad(x, y), fd, rtol=1e-5, atol=1e-7)
    H = inst.g_hess_yy(x, y)
    fd_col = finite_difference_gradient(lambda v: inst.g_grad_y(x, v)[0], y)
    np.testing.assert_allclose(H[0], fd_col, rtol=1e-5, atol=1e-7)


def test_polytope_kappa_is_finite():
    ti = toll.generate_toll_instance(20, 1, 0.2)
    P = toll.toll_polytope(ti)
    assert poly.is_strict_interior(P, ti.y_int)
    assert 1.0 <= poly.euclidean_dikin_kappa(P) < np.inf


def test_normalized_gap_arithmetic():
    assert toll.normalized_gap(101.0, 100.0) == pytest.approx(10.0)
    assert toll.normalized_gap(1e-5, 0.0) == pytest.approx(0.1)
    assert toll.normalized_gap(100.0, 100.0) == 0.0


def test_certified_schedule_passes():
    ti = toll.generate_toll_instance(20, 0, 0.2)
    s, c = toll.certified_toll_schedule(ti)
    assert toll.certify_toll(ti, s, 200, c).passed


def test_zero_budget_is_censored():
    ti = toll.generate_toll_instance(20, 0, 0.2)
    s = toll.constant_schedule(5, 1e-4, 1e-3, 100.0, 10.0, 3, 0.25, 1e-3)
    res = toll.run_bmfo_toll(ti, s, 5, budget_ms=0)
    assert res.status == "budget-censored" and res.iterations == 0
    np.testing.assert_array_equal(res.x_final, ti.x0)


def test_short_run_stays_in_box():
    ti = toll.generate_toll_instance(20, 0, 0.2)
    s = toll.constant_schedule(5, 1e-4, 1e-3, 100.0, 1e3, 3, 0.25, 1e-3)
    res = toll.run_bmfo_toll(ti, s, 5)
    assert res.status == "ok" and res.iterations == 5
    assert np.all((res.x_final >= toll.X_BOX[0]) & (res.x_final <= toll.X_BOX[1]))
