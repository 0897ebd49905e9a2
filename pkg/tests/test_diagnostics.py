import numpy as np
import pytest

from barrierbilevel import bmfo, diagnostics as dg
from barrierbilevel.barrier import BarrierProblem
from barrierbilevel.benchmarks.quadratic import FIVE_D_X0, five_d_instance, one_d_instance
from barrierbilevel.errors import InvalidInput


def test_loglog_slope_exact_power():
    xs = np.array([1.0, 10.0, 100.0])
    assert dg.loglog_slope(xs, 3.0 * xs ** -1.5) == pytest.approx(-1.5)
    with pytest.raises(InvalidInput):
        dg.loglog_slope([1.0], [1.0])
    with pytest.raises(InvalidInput):
        dg.loglog_slope([1.0, 2.0], [0.0, 1.0])


def test_finite_difference_quadratic():
    g = dg.finite_difference_gradient(lambda v: v @ v, np.array([1.0, -2.0]))
    np.testing.assert_allclose(g, [2.0, -4.0], rtol=1e-8)


def test_bias_report_one_d():
    rep = dg.bias_report(one_d_instance(0.6), np.array([0.5]), [1e-2, 1e-3, 1e-4])
    assert rep.passed
    assert [r[0] for r in rep.rows] == [1e-2, 1e-3, 1e-4]
    assert rep.to_rows()[0] == dg.BIAS_COLUMNS
    with pytest.raises(InvalidInput):
        dg.bias_report(one_d_instance(), np.array([0.5]), [1e-2], mu_ref=1e-3)


def test_anchored_error_outside_is_infinite():
    P = five_d_instance().polytope
    c = np.full(5, 0.4)
    assert dg.anchored_error(P, np.full(5, 1.5), c) == np.inf
    assert dg.anchored_error(P, None, c) == np.inf
    assert dg.anchored_error(P, c, c) == 0.0


def test_build_tube_report_exit_index():
    rep = dg.build_tube_report([0.1, 0.2, 0.3, 0.1], [np.nan] * 4, 0.25)
    assert rep.first_exit_index == 2
    assert rep.max_exact_err == 0.3 and np.isnan(rep.max_proxy_err)
    assert rep.summary()["max_proxy_err"] is None
    assert dg.build_tube_report([0.1], [0.3], 0.25).first_exit_index == 0


def test_tube_and_stationarity_on_short_run():
    bp = BarrierProblem(five_d_instance(), 1e-2)
    s = bmfo.make_schedule("deterministic_polynomial", 0.01, 0.2, 20.0, 1.0, 5.0, 5, 0.25, 1e-2)
    tr = bmfo.run(bp, s, FIVE_D_X0, 40)
    rep = dg.tube_report(tr, bp)
    assert len(rep.rows) == 41 and rep.first_exit_index is None
    ks, vals, rmin = dg.stationarity_series(tr, bp, every=7)
    assert ks[0] == 0 and ks[-1] == 40
    assert np.all(np.diff(rmin) <= 0) and rmin[-1] < vals[0]


def test_proxy_bias_curve_rate():
    bp = BarrierProblem(one_d_instance(), 1e-2)
    rows, slope = dg.proxy_bias_curve(bp, np.array([0.3]), [10.0, 100.0, 1000.0])
    assert len(rows) == 3
    assert -1.3 <= slope <= -0.7
