import numpy as np
import pytest
from scipy.optimize import brentq

from barrierbilevel import barrier as br
from barrierbilevel.benchmarks.quadratic import (
    five_d_instance,
    one_d_instance,
    one_d_target_instance,
)
from barrierbilevel.diagnostics import finite_difference_gradient
from barrierbilevel.errors import InvalidInput, InvalidParameter, NotSPD
from barrierbilevel.polytope import Polytope
from barrierbilevel.problem import AffineMap, StochasticUpperOracle, quadratic_instance, sample_ball


def _bisection_center(target, mu):
    # stationarity of (y - target)^2/2 - mu (log y + log(1 - y)) on (0, 1)
    return brentq(lambda y: (y - target) + mu * (1 / (1 - y) - 1 / y), 1e-12, 1 - 1e-12, xtol=1e-15)


def test_one_d_center_matches_bisection():
    bp = br.BarrierProblem(one_d_target_instance(0.8), 0.01)
    y = br.solve_exact_center(bp, np.zeros(1), tol=1e-13).y_star[0]
    assert y == pytest.approx(_bisection_center(0.8, 0.01), abs=1e-10)
    assert y == pytest.approx(0.76955, abs=1e-4)


def test_symmetric_psi_star():
    bp = br.BarrierProblem(one_d_target_instance(0.5), 0.01)
    assert br.psi_star_value(bp, np.zeros(1)) == pytest.approx(0.0138629, abs=1e-7)


def test_one_d_hypergradient_closed_form():
    bp = br.BarrierProblem(one_d_instance(), 0.01)
    g = br.exact_hypergradient(bp, np.array([0.5]), tol=1e-12)
    assert g[0] == pytest.approx(0.5 / 1.08, rel=1e-9)


def test_hypergradient_matches_fd_five_d():
    bp = br.BarrierProblem(five_d_instance(), 1e-2)
    x = np.array([0.2, -0.1, 0.4])
    fd = finite_difference_gradient(lambda v: br.smoothed_value(bp, v), x, 1e-5)
    np.testing.assert_allclose(br.exact_hypergradient(bp, x, tol=1e-12), fd, rtol=1e-5, atol=1e-9)


def test_envelope_gradient_approaches_hypergradient():
    bp = br.BarrierProblem(one_d_instance(), 0.01)
    x = np.array([0.3])
    h = br.exact_hypergradient(bp, x, tol=1e-12)
    errs = [abs(br.envelope_gradient(bp, lam, x, tol=1e-12)[0] - h[0]) for lam in (10.0, 100.0, 1000.0)]
    assert errs[0] > errs[1] > errs[2]


def test_proxy_center_solves_its_stationarity():
    bp = br.BarrierProblem(five_d_instance(), 1e-2)
    x = np.array([0.1, 0.2, 0.3])
    sol = br.solve_proxy_center(bp, 50.0, x, tol=1e-11)
    assert sol.stationarity_residual <= 1e-11
    assert np.linalg.norm(br.proxy_grad_y(bp, 50.0, x, sol.y_star)) < 1e-8


def test_reference_solution_near_active_face():
    # g = (y - 1.2)^2/2 on [0, 1]: -0.2 + mu/s = 0 gives s = 5 mu
    inst = one_d_target_instance(1.2)
    y, F = br.reference_constrained_solution(inst, np.zeros(1), mu_ref=1e-10)
    assert 1.0 - y[0] == pytest.approx(5e-10, rel=1e-3)
    assert F == pytest.approx(0.5, abs=1e-9)


def test_mu_ladder():
    assert br.mu_ladder(1e-6) == pytest.approx([1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    assert br.mu_ladder(1e-2) == [1e-2]


def test_nonpositive_mu_rejected():
    with pytest.raises(InvalidParameter):
        br.BarrierProblem(one_d_instance(), 0.0)


def test_quadratic_instance_validation():
    P = Polytope.box([0.0], [1.0])
    with pytest.raises(NotSPD):
        quadratic_instance([[1.0]], [0.0], [[-1.0]], AffineMap(np.eye(1), np.zeros(1)), P)
    with pytest.raises(InvalidInput):
        quadratic_instance([[1.0]], [0.0], np.eye(2), AffineMap(np.eye(2), np.zeros(2)), P)


def test_quadratic_oracles_match_fd(rng):
    inst = five_d_instance()
    x = rng.standard_normal(3) * 0.3
    y = np.full(5, 0.4)
    np.testing.assert_allclose(inst.g_grad_x(x, y),
                               finite_difference_gradient(lambda v: inst.g_value(v, y), x), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(inst.g_grad_y(x, y),
                               finite_difference_gradient(lambda v: inst.g_value(x, v), y), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(inst.f_grad_y(x, y),
                               finite_difference_gradient(lambda v: inst.f_value(x, v), y), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(inst.f_grad_x(x, y),
                               finite_difference_gradient(lambda v: inst.f_value(v, y), x), rtol=1e-6, atol=1e-9)


def test_sample_ball_radius(rng):
    pts = np.array([sample_ball(rng, 3, 0.1) for _ in range(500)])
    assert np.linalg.norm(pts, axis=1).max() <= 0.1 + 1e-15
    np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=0.01)
    assert np.all(sample_ball(rng, 3, 0.0) == 0.0)


def test_stochastic_oracle_is_reproducible():
    inst = five_d_instance()
    a = StochasticUpperOracle(inst, 0.1, 0.1, rng_seed=7)
    b = StochasticUpperOracle(inst, 0.1, 0.1, rng_seed=7)
    x, y = np.zeros(3), np.full(5, 0.4)
    g1 = [a.f_grad_y(x, y) for _ in range(3)]
    g2 = [b.f_grad_y(x, y) for _ in range(3)]
    np.testing.assert_array_equal(g1, g2)
    assert np.linalg.norm(g1[0] - inst.f_grad_y(x, y)) <= 0.1
    a.reset()
    np.testing.assert_array_equal(a.f_grad_y(x, y), g1[0])
    with pytest.raises(InvalidInput):
        StochasticUpperOracle(inst, -1.0, 0.0)
