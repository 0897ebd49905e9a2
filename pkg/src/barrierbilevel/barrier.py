"""Barrierized lower objective, proxy objective and high-accuracy oracles.

``psi_mu(x, y) = g(x, y) + mu * phi(y)`` and the proxy objective
``L(x, y) = f(x, y) + lam * (psi_mu(x, y) - psi_star(x))``. The center
solvers here are verification oracles; the first-order algorithm in
:mod:`barrierbilevel.bmfo` never calls them inside its loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg

from . import polytope as poly
from .errors import (
    ConvergenceFailure,
    InvalidParameter,
    MissingSecondOrderOracle,
    NonConvexityDetected,
)
from .problem import BilevelInstance

FRACTION_TO_BOUNDARY = 0.99
ARMIJO_C = 1e-4


@dataclass(frozen=True)
class BarrierProblem:
    instance: BilevelInstance
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidParameter("barrier parameter mu must be positive")

    @property
    def polytope(self):
        return self.instance.polytope


class CenterSolution(NamedTuple):
    y_star: np.ndarray
    stationarity_residual: float
    iterations: int


def psi_value(bp: BarrierProblem, x, y) -> float:
    return bp.instance.g_value(x, y) + bp.mu * poly.barrier_value(bp.polytope, y)


def psi_grad_y(bp: BarrierProblem, x, y) -> np.ndarray:
    return bp.instance.g_grad_y(x, y) + bp.mu * poly.barrier_gradient(bp.polytope, y)


def psi_grad_x(bp: BarrierProblem, x, y) -> np.ndarray:
    poly.interior_slacks(bp.polytope, y)
    return bp.instance.g_grad_x(x, y)


def psi_hess_yy(bp: BarrierProblem, x, y) -> np.ndarray:
    if bp.instance.g_hess_yy is None:
        raise MissingSecondOrderOracle("instance has no g_hess_yy oracle")
    H = np.atleast_2d(bp.instance.g_hess_yy(x, y))
    return H + bp.mu * poly.barrier_hessian(bp.polytope, y)


def proxy_value(bp: BarrierProblem, lam: float, x, y, psi_star: float) -> float:
    return bp.instance.f_value(x, y) + lam * (psi_value(bp, x, y) - psi_star)


def proxy_grad_y(bp: BarrierProblem, lam: float, x, y) -> np.ndarray:
    return bp.instance.f_grad_y(x, y) + lam * psi_grad_y(bp, x, y)


def _stationarity(P, y, grad) -> float:
    return poly.dikin_dual_norm(poly.make_anchor(P, y), grad)


def _minimize_interior(P, value: Callable, grad: Callable, hess: Optional[Callable],
                       y0, tol: float, max_iter: Optional[int],
                       indefinite_exc=ConvergenceFailure) -> CenterSolution:
    """Damped Newton (or barrier-metric gradient descent) with a boundary guard.

    Stops once the gradient's Dikin dual norm at the iterate is <= tol.
    """
    y = np.array(y0, dtype=float)
    poly.interior_slacks(P, y)
    if max_iter is None:
        max_iter = 200 if hess is not None else 200_000
    t_prev = 1.0
    res = np.inf
    for it in range(max_iter + 1):
        gvec = grad(y)
        anchor = poly.make_anchor(P, y)
        res = poly.dikin_dual_norm(anchor, gvec)
        if res <= tol:
            return CenterSolution(y, res, it)
        if it == max_iter:
            break
        if hess is not None:
            H = hess(y)
            try:
                cf = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                raise indefinite_exc("Newton step met an indefinite Hessian") from None
            d = -scipy.linalg.cho_solve(cf, gvec, check_finite=False)
            t = 1.0
        else:
            d = -anchor.solve(gvec)
            t = min(1.0, 2.0 * t_prev)
        t = min(t, poly.max_step_to_boundary(P, y, d, FRACTION_TO_BOUNDARY))
        f0 = value(y)
        slope = gvec @ d
        slack = 1e-14 * (1.0 + abs(f0))
        while True:
            y_new = y + t * d
            if poly.is_strict_interior(P, y_new) and value(y_new) <= f0 + ARMIJO_C * t * slope + slack:
                break
            t *= 0.5
            if t < 1e-20:
                raise ConvergenceFailure("line search failed in center solve",
                                         residual=res, iterations=it)
        y = y_new
        t_prev = t
    raise ConvergenceFailure(
        f"center solve did not reach tol {tol:.1e} (residual {res:.3e})",
        residual=res, iterations=max_iter)


def solve_exact_center(bp: BarrierProblem, x, y_init=None, tol: float = 1e-10,
                       max_iter: Optional[int] = None) -> CenterSolution:
    """Minimizer of ``psi_mu(x, .)`` over the polytope interior."""
    P = bp.polytope
    y0 = P.interior_witness if y_init is None else y_init
    x = np.asarray(x, dtype=float)
    hess = (lambda y: psi_hess_yy(bp, x, y)) if bp.instance.g_hess_yy is not None else None
    return _minimize_interior(
        P,
        lambda y: psi_value(bp, x, y),
        lambda y: psi_grad_y(bp, x, y),
        hess, y0, tol, max_iter,
    )


def psi_star_value(bp: BarrierProblem, x, tol: float = 1e-10, y_init=None) -> float:
    sol = solve_exact_center(bp, x, y_init, tol)
    return psi_value(bp, x, sol.y_star)


def solve_proxy_center(bp: BarrierProblem, lam: float, x, y_init=None, tol: float = 1e-10,
                       max_iter: Optional[int] = None) -> CenterSolution:
    """Minimizer of the proxy objective ``f + lam * psi_mu`` over the interior.

    Raises :class:`NonConvexityDetected` when Newton meets an indefinite
    Hessian, which means ``lam`` is too small for the proxy to be convex here.
    """
    P = bp.polytope
    inst = bp.instance
    y0 = P.interior_witness if y_init is None else y_init
    x = np.asarray(x, dtype=float)
    hess = None
    if inst.g_hess_yy is not None and inst.f_hess_yy is not None:
        def proxy_hess(y):
            return np.atleast_2d(inst.f_hess_yy(x, y)) + lam * psi_hess_yy(bp, x, y)
        hess = proxy_hess
    return _minimize_interior(
        P,
        lambda y: inst.f_value(x, y) + lam * psi_value(bp, x, y),
        lambda y: proxy_grad_y(bp, lam, x, y),
        hess, y0, tol, max_iter,
        indefinite_exc=NonConvexityDetected,
    )


def smoothed_value(bp: BarrierProblem, x, tol: float = 1e-12, y_init=None) -> float:
    """``F_mu(x) = f(x, y_mu*(x))``."""
    y = solve_exact_center(bp, x, y_init, tol).y_star
    return float(bp.instance.f_value(np.asarray(x, dtype=float), y))


def exact_hypergradient(bp: BarrierProblem, x, tol: float = 1e-10, y_init=None,
                        return_center: bool = False):
    """Implicit-function hypergradient of ``F_mu`` at ``x``.

    ``grad_x f - G^T (grad_yy psi)^{-1} grad_y f`` at the exact center, with
    ``G = d(grad_y g)/dx``.
    """
    inst = bp.instance
    if not inst.has_second_order:
        raise MissingSecondOrderOracle("exact_hypergradient needs g_hess_yy and g_hess_xy")
    x = np.asarray(x, dtype=float)
    y = solve_exact_center(bp, x, y_init, tol).y_star
    H = psi_hess_yy(bp, x, y)
    G = np.atleast_2d(inst.g_hess_xy(x, y))
    v = scipy.linalg.solve(H, inst.f_grad_y(x, y), assume_a="pos")
    grad = inst.f_grad_x(x, y) - G.T @ v
    return (grad, y) if return_center else grad


def envelope_gradient(bp: BarrierProblem, lam: float, x, tol: float = 1e-8,
                      y_init=None, z_init=None) -> np.ndarray:
    """Gradient of ``x -> min_y L(x, y)`` by the envelope theorem."""
    inst = bp.instance
    x = np.asarray(x, dtype=float)
    z = solve_exact_center(bp, x, z_init, tol).y_star
    y = solve_proxy_center(bp, lam, x, y_init if y_init is not None else z, tol).y_star
    return inst.f_grad_x(x, y) + lam * (inst.g_grad_x(x, y) - inst.g_grad_x(x, z))


def mu_ladder(mu_ref: float, mu_start: float = 1e-2):
    """Geometric continuation values ``mu_start * 10^-j`` ending at ``mu_ref``."""
    ladder = []
    mu = mu_start
    while mu > mu_ref * (1 + 1e-12):
        ladder.append(mu)
        mu /= 10.0
    ladder.append(mu_ref)
    return ladder


def reference_constrained_solution(instance: BilevelInstance, x, mu_ref: float = 1e-10,
                                   tol: float = 1e-10, y_init=None):
    """Approximate the constrained lower solution by following the barrier path.

    Returns ``(y_ref, f(x, y_ref))``. The distance from ``y_ref`` to the true
    constrained minimizer is at most ``sqrt(2 m mu_ref / rho_g)``.
    """
    x = np.asarray(x, dtype=float)
    y = instance.polytope.interior_witness if y_init is None else y_init
    for mu in mu_ladder(mu_ref):
        # tol * sqrt(mu) in the phi metric bounds the psi-Newton decrement by tol;
        # 1e-14 is the roundoff floor of the residual itself
        step_tol = min(tol, max(tol * math.sqrt(mu), 1e-14))
        y = solve_exact_center(BarrierProblem(instance, mu), x, y, step_tol).y_star
    return y, float(instance.f_value(x, y))
