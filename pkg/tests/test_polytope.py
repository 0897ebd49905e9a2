import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barrierbilevel import polytope as poly
from barrierbilevel.diagnostics import finite_difference_gradient
from barrierbilevel.errors import InvalidInput, MissingBounds, NonInterior
from barrierbilevel.polytope import Polytope

from conftest import random_interior_point, random_polytope

UNIT = Polytope(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]), np.array([0.5]), np.array([1.0, 1.0]))


def test_slacks_unit_interval():
    np.testing.assert_allclose(poly.slacks(UNIT, np.array([0.5])), [0.5, 0.5])


def test_strict_interior_and_margin():
    assert poly.is_strict_interior(UNIT, np.array([0.5]))
    assert not poly.is_strict_interior(UNIT, np.array([1.0]))
    assert not poly.is_strict_interior(UNIT, np.array([0.95]), margin=0.1)
    with pytest.raises(NonInterior):
        poly.barrier_value(UNIT, np.array([1.0]))


def test_barrier_closed_forms_unit_interval():
    y = np.array([0.25])
    assert poly.barrier_value(UNIT, y) == pytest.approx(-np.log(0.75) - np.log(0.25))
    np.testing.assert_allclose(poly.barrier_gradient(UNIT, y), [1 / 0.75 - 1 / 0.25])
    np.testing.assert_allclose(poly.barrier_hessian(UNIT, y), [[1 / 0.75**2 + 1 / 0.25**2]])


def test_witness_must_be_interior():
    with pytest.raises(NonInterior):
        Polytope(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]), np.array([0.0]))


def test_rank_deficient_rejected():
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(InvalidInput):
        Polytope(A, np.ones(2), np.zeros(2))


def test_dimension_mismatch():
    with pytest.raises(InvalidInput):
        poly.slacks(UNIT, np.zeros(2))


def test_box_constructor_and_roundtrip():
    P = Polytope.box([0.0, -1.0], [2.0, 1.0])
    np.testing.assert_allclose(P.interior_witness, [1.0, 0.0])
    np.testing.assert_allclose(P.slack_upper_bounds, [2.0, 2.0, 2.0, 2.0])
    Q = Polytope.from_json(__import__("json").dumps(P.to_dict()))
    np.testing.assert_array_equal(Q.A, P.A)
    np.testing.assert_array_equal(Q.b, P.b)
    R = Polytope.from_dict({"box": {"lower": [0, 0], "upper": [1, 1]}})
    assert R.m == 4 and R.dim == 2


def test_hessian_apply_matches_dense(rng):
    P = random_polytope(rng, 6)
    y = random_interior_point(rng, P)
    v = rng.standard_normal(6)
    np.testing.assert_allclose(poly.barrier_hessian_apply(P, y, v), poly.barrier_hessian(P, y) @ v,
                               rtol=1e-12, atol=1e-12)


def test_gradient_matches_finite_differences(rng):
    P = random_polytope(rng, 4)
    y = random_interior_point(rng, P, 0.5)
    fd = finite_difference_gradient(lambda z: poly.barrier_value(P, z), y, 1e-6)
    np.testing.assert_allclose(poly.barrier_gradient(P, y), fd, rtol=1e-6)


def test_anchor_dense_and_pcg_agree(rng):
    P = random_polytope(rng, 12)
    c = random_interior_point(rng, P)
    dense = poly.make_anchor(P, c)
    iterative = poly.make_anchor(P, c, dense_threshold=0, solve_tol=1e-13)
    assert dense.dense and not iterative.dense
    w = rng.standard_normal(12)
    x1 = poly.anchor_solve(dense, w)
    x2 = poly.anchor_solve(iterative, w)
    np.testing.assert_allclose(x1, x2, rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(poly.barrier_hessian(P, c) @ x1, w, rtol=1e-8, atol=1e-10)
    assert poly.dikin_dual_norm(dense, w) == pytest.approx(poly.dikin_dual_norm(iterative, w), rel=1e-7)


def test_dikin_norm_duality(rng):
    P = random_polytope(rng, 5)
    c = random_interior_point(rng, P)
    a = poly.make_anchor(P, c)
    u = rng.standard_normal(5)
    H = poly.barrier_hessian(P, c)
    assert poly.dikin_norm(a, u) == pytest.approx(np.sqrt(u @ H @ u), rel=1e-12)
    # ||Hu||_* = ||u||
    assert poly.dikin_dual_norm(a, H @ u) == pytest.approx(poly.dikin_norm(a, u), rel=1e-9)
    assert poly.dikin_dual_norm(a, np.zeros(5)) == 0.0


def test_anchor_survives_tiny_slacks():
    # slacks 1e-11 against O(1): Cholesky of the normal matrix would lose definiteness
    P = Polytope.box([0.0, 0.0], [1.0, 1.0])
    y = np.array([1.0 - 1e-11, 0.5])
    a = poly.make_anchor(P, y)
    w = np.array([1.0, 1.0])
    v = a.solve(w)
    np.testing.assert_allclose(poly.barrier_hessian(P, y) @ v, w, rtol=1e-6)


def test_metric_bounds_outside_unit_ball():
    # Dikin radius at the midpoint of [0, 1] is |dy| * sqrt(8)
    near = poly.metric_comparison_bounds(UNIT, np.array([0.5]), np.array([0.4]))
    assert near.r == pytest.approx(0.1 * np.sqrt(8.0))
    assert near.valid and near.lower == pytest.approx((1 - near.r) ** 2)
    far = poly.metric_comparison_bounds(UNIT, np.array([0.5]), np.array([0.1]))
    assert not far.valid and far.upper == np.inf


def test_kappa_unit_interval_and_missing_bounds():
    assert poly.euclidean_dikin_kappa(UNIT) == 1.0
    with pytest.raises(MissingBounds):
        poly.euclidean_dikin_kappa(Polytope(UNIT.A, UNIT.b, UNIT.interior_witness))


def test_kappa_bounds_euclidean_by_dikin(rng):
    P = Polytope.box([-2.0, -1.0, 0.0], [2.0, 3.0, 5.0])
    kappa = poly.euclidean_dikin_kappa(P)
    for _ in range(20):
        y = random_interior_point(rng, P)
        a = poly.make_anchor(P, y)
        u = rng.standard_normal(3)
        assert np.linalg.norm(u) <= kappa * poly.dikin_norm(a, u) * (1 + 1e-12)


def test_analytic_center_of_box_is_midpoint():
    P = Polytope.box([0.0, -3.0], [2.0, 1.0])
    np.testing.assert_allclose(poly.analytic_center(P, y0=np.array([0.3, 0.5])), [1.0, -1.0], atol=1e-9)


def test_max_step_to_boundary():
    t = poly.max_step_to_boundary(UNIT, np.array([0.5]), np.array([1.0]), 0.99)
    assert t == pytest.approx(0.495)
    assert poly.max_step_to_boundary(UNIT, np.array([0.5]), np.array([0.0]), 0.99) == 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=10_000))
def test_analytic_center_is_stationary(d, seed):
    rng = np.random.default_rng(seed)
    P = random_polytope(rng, d)
    c = poly.analytic_center(P)
    a = poly.make_anchor(P, c)
    assert poly.dikin_dual_norm(a, poly.barrier_gradient(P, c)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.floats(min_value=0.05, max_value=0.95))
def test_anchor_switch_sandwich(seed, r_target):
    rng = np.random.default_rng(seed)
    P = random_polytope(rng, 3)
    y1 = random_interior_point(rng, P)
    a = poly.make_anchor(P, y1)
    u = rng.standard_normal(3)
    y2 = y1 + r_target * u / poly.dikin_norm(a, u)
    bounds = poly.metric_comparison_bounds(P, y1, y2)
    assert bounds.valid and bounds.r == pytest.approx(r_target, rel=1e-9)
    H1, H2 = poly.barrier_hessian(P, y1), poly.barrier_hessian(P, y2)
    ev = np.linalg.eigvals(np.linalg.solve(H1, H2)).real
    assert ev.min() >= bounds.lower * (1 - 1e-9)
    assert ev.max() <= bounds.upper * (1 + 1e-9)
