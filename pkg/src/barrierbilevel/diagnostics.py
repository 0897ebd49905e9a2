"""Offline verification: bias tables, tube errors, stationarity and rate fitting.

Nothing here is called by the solver; every function recomputes oracle
quantities (centers, hypergradients) to tolerances well below the values
being measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import polytope as poly
from .barrier import (
    BarrierProblem,
    envelope_gradient,
    exact_hypergradient,
    reference_constrained_solution,
    solve_exact_center,
    solve_proxy_center,
)
from .errors import InvalidInput

ORACLE_TOL = 1e-10


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2 or xs.shape != ys.shape:
        raise InvalidInput("need at least two (x, y) pairs of equal length")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidInput("loglog_slope needs strictly positive values")
    lx, ly = np.log(xs), np.log(ys)
    lx0 = lx - lx.mean()
    return float(lx0 @ (ly - ly.mean()) / (lx0 @ lx0))


def finite_difference_gradient(field_fn, x, h: float = 1e-6) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (field_fn(x + e) - field_fn(x - e)) / (2.0 * h)
    return grad


# --------------------------------------------------------------------------
# barrier bias
# --------------------------------------------------------------------------

BIAS_COLUMNS = ("mu", "g_gap", "y_dist", "F_gap", "bound_g", "bound_y", "bound_F")


@dataclass
class BiasReport:
    rows: List[tuple]
    l_f0: float
    slopes: dict
    passed: bool

    def to_rows(self):
        return [BIAS_COLUMNS] + [tuple(r) for r in self.rows]


def sampled_grad_bound(instance, x, points, n_segment: int = 21) -> float:
    """Largest ``||grad_y f(x, .)||`` on the segments from ``points[0]`` to each other point."""
    base = np.asarray(points[0], float)
    best = 0.0
    for p in points:
        for t in np.linspace(0.0, 1.0, n_segment):
            y = (1 - t) * base + t * np.asarray(p, float)
            best = max(best, float(np.linalg.norm(instance.f_grad_y(x, y))))
    return best


def bias_report(instance, x, mu_list, mu_ref: float = 1e-10, l_f0: Optional[float] = None,
                tol: float = ORACLE_TOL, slack: float = 1e-6, g_floor: float = 1e-10) -> BiasReport:
    """Compare barrier centers with the reference constrained solution for each ``mu``.

    Bounds: ``g_gap <= m mu``, ``||y_mu - y_ref|| <= sqrt(2 m mu / rho_g)``,
    ``|F_mu - F_ref| <= l_f0 * sqrt(2 m mu / rho_g)``. When ``l_f0`` is not
    given, the instance's declared bound is used, else a sampled maximum.
    """
    mu_list = sorted((float(m) for m in mu_list), reverse=True)
    if mu_ref >= min(mu_list) / 100.0:
        raise InvalidInput("mu_ref must be below min(mu_list) / 100")
    x = np.asarray(x, dtype=float)
    m = instance.polytope.m
    y_ref, F_ref = reference_constrained_solution(instance, x, mu_ref, tol)
    g_ref = instance.g_value(x, y_ref)

    centers = []
    y = instance.polytope.interior_witness
    for mu in mu_list:
        y = solve_exact_center(BarrierProblem(instance, mu), x, y, tol).y_star
        centers.append(y)
    if l_f0 is None:
        l_f0 = instance.l_f0
    if l_f0 is None:
        l_f0 = sampled_grad_bound(instance, x, [y_ref] + centers)

    rows = []
    ok = True
    for mu, y in zip(mu_list, centers):
        g_gap = float(instance.g_value(x, y) - g_ref)
        y_dist = float(np.linalg.norm(y - y_ref))
        F_gap = float(abs(instance.f_value(x, y) - F_ref))
        bound_g = m * mu
        bound_y = math.sqrt(2.0 * m * mu / instance.rho_g)
        bound_F = l_f0 * bound_y
        rows.append((mu, g_gap, y_dist, F_gap, bound_g, bound_y, bound_F))
        ok &= (-g_floor <= g_gap <= bound_g) and y_dist <= bound_y + slack and F_gap <= bound_F + slack

    mus = np.array([r[0] for r in rows])
    slopes = {}
    for name, col in (("g_gap", 1), ("y_dist", 2), ("F_gap", 3)):
        vals = np.array([r[col] for r in rows])
        slopes[name] = loglog_slope(mus, vals) if np.all(vals > 0) else float("nan")
    return BiasReport(rows, float(l_f0), slopes, bool(ok))


# --------------------------------------------------------------------------
# tube errors
# --------------------------------------------------------------------------

TUBE_COLUMNS = ("k", "exact_err", "proxy_err")


@dataclass
class TubeReport:
    rows: List[tuple]
    eta: float
    max_exact_err: float
    max_proxy_err: float
    first_exit_index: Optional[int]
    exact_centers: Optional[np.ndarray] = field(default=None, repr=False)

    def to_rows(self):
        return [TUBE_COLUMNS] + [tuple(r) for r in self.rows]

    def summary(self) -> dict:
        return {
            "eta": self.eta,
            "max_exact_err": _finite_or_none(self.max_exact_err),
            "max_proxy_err": _finite_or_none(self.max_proxy_err),
            "first_exit_index": self.first_exit_index,
        }


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


def anchored_error(P, point, center) -> float:
    """``||point - center||_center``; infinite once ``point`` leaves the interior."""
    if point is None or not np.all(np.isfinite(point)) or not poly.is_strict_interior(P, point):
        return float("inf")
    return poly.dikin_norm(poly.make_anchor(P, center), np.asarray(point) - center)


def build_tube_report(exact_errs, proxy_errs, eta, centers=None) -> TubeReport:
    exact_errs = np.asarray(exact_errs, float)
    proxy_errs = np.asarray(proxy_errs, float)
    worst = np.fmax(exact_errs, proxy_errs)  # fmax skips the NaN of a missing proxy column
    exits = np.flatnonzero(~(worst <= eta))
    rows = [(k, float(e), float(p)) for k, (e, p) in enumerate(zip(exact_errs, proxy_errs))]
    return TubeReport(
        rows, eta,
        float(np.nanmax(exact_errs)) if exact_errs.size else 0.0,
        float(np.nanmax(proxy_errs)) if np.any(~np.isnan(proxy_errs)) else float("nan"),
        int(exits[0]) if exits.size else None,
        None if centers is None else np.asarray(centers),
    )


def tube_report(trace, bp: BarrierProblem, schedule=None, tol: float = ORACLE_TOL,
                include_proxy: bool = True) -> TubeReport:
    """Anchored Dikin distance of each recorded tracker to its oracle center."""
    schedule = trace.schedule if schedule is None else schedule
    P = bp.polytope
    exact_errs, proxy_errs, centers = [], [], []
    zc = yc = None
    for rec in trace.records:
        zc = solve_exact_center(bp, rec.x, zc if zc is not None else rec.z, tol).y_star
        centers.append(zc)
        exact_errs.append(anchored_error(P, rec.z, zc))
        if include_proxy:
            yc = solve_proxy_center(bp, rec.lam, rec.x, yc if yc is not None else rec.y, tol).y_star
            proxy_errs.append(anchored_error(P, rec.y, yc))
        else:
            proxy_errs.append(float("nan"))
    return build_tube_report(exact_errs, proxy_errs, schedule.eta, centers)


# --------------------------------------------------------------------------
# stationarity and proxy bias
# --------------------------------------------------------------------------

STATIONARITY_COLUMNS = ("k", "grad_sq", "running_min")


def stationarity_series(trace, bp: BarrierProblem, tol: float = ORACLE_TOL, every: int = 1):
    """``||grad F_mu(x_k)||^2`` and its running minimum over recorded ``k``.

    ``every`` subsamples the trace (the last record is always included).
    Returns ``(ks, values, running_min)`` arrays.
    """
    idx = list(range(0, len(trace.records), every))
    if idx[-1] != len(trace.records) - 1:
        idx.append(len(trace.records) - 1)
    vals = []
    yc = None
    for k in idx:
        rec = trace.records[k]
        grad, yc = exact_hypergradient(bp, rec.x, tol, yc if yc is not None else rec.z,
                                       return_center=True)
        vals.append(float(grad @ grad))
    vals = np.array(vals)
    return np.array(idx), vals, np.minimum.accumulate(vals)


def proxy_bias_curve(bp: BarrierProblem, x, lambda_list, tol: float = 1e-12):
    """Rows ``(lam, ||grad F_mu(x) - grad C*_lam(x)||)`` and their log-log slope."""
    x = np.asarray(x, dtype=float)
    hyper, z = exact_hypergradient(bp, x, tol, return_center=True)
    rows = []
    for lam in lambda_list:
        env = envelope_gradient(bp, lam, x, tol, y_init=z, z_init=z)
        rows.append((float(lam), float(np.linalg.norm(hyper - env))))
    lams = np.array([r[0] for r in rows])
    bias = np.array([r[1] for r in rows])
    slope = loglog_slope(lams, bias) if np.all(bias > 0) else float("nan")
    return rows, slope
