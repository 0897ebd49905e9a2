"""Synthetic congestion-toll benchmark.

Upper variable ``x`` holds corridor tolls, lower variable ``y`` the induced
corridor flows on ``Y(tau) = {0 <= y <= u, C y <= tau d, 1^T y <= D}``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
import scipy.optimize

from .. import polytope as poly
from ..barrier import BarrierProblem, exact_hypergradient, reference_constrained_solution, smoothed_value
from ..bmfo import (
    LocalConstants,
    RunTrace,
    certified_polynomial_schedule,
    certify_barrier_aware,
    default_local_constants,
    make_schedule,
    run,
)
from ..errors import InvalidParameter
from ..polytope import Polytope
from ..problem import BilevelInstance

X_BOX = (0.0, 10.0)
GAP_FLOOR = 1e-4
GAP_REL = 1e-3

_ARRAY_FIELDS = ("C", "u", "ell", "q", "d", "V", "x0", "y_int")


@dataclass(frozen=True, eq=False)
class TollInstance:
    n: int
    seed: int
    tau: float
    C: np.ndarray
    u: np.ndarray
    ell: np.ndarray
    q: np.ndarray
    d: np.ndarray
    V: np.ndarray
    D: float
    R_tar: float
    kappa: float
    beta: float
    rho_rev: float
    rho_x: float
    x0: np.ndarray
    y_int: np.ndarray

    @property
    def m_b(self) -> int:
        return self.C.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.q) + self.V @ self.V.T / self.n

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            v = getattr(self, f.name)
            doc[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "TollInstance":
        doc = dict(doc)
        for key in _ARRAY_FIELDS:
            doc[key] = np.asarray(doc[key], dtype=float)
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "TollInstance":
        return cls.from_dict(json.loads(text))


def bottleneck_count(n: int) -> int:
    return max(5, n // 10)


def _incidence(rng: np.random.Generator, n: int, m_b: int) -> np.ndarray:
    # corridor-major: each corridor picks 1 to 3 distinct bottlenecks
    C = np.zeros((m_b, n))
    for i in range(n):
        k = int(rng.integers(1, 4))
        C[rng.choice(m_b, size=k, replace=False), i] = 1.0
    # coverage repair, lowest uncovered bottleneck first; the donor corridor is
    # drawn among those still using fewer than 3 bottlenecks
    for r in range(m_b):
        if C[r].sum() == 0:
            open_cols = np.flatnonzero(C.sum(axis=0) < 3)
            C[r, open_cols[int(rng.integers(open_cols.size))]] = 1.0
    return C


def generate_toll_instance(n: int, seed: int, tau: float) -> TollInstance:
    """Sample one instance with ``numpy.random.default_rng(seed)``."""
    if int(n) != n or n < 10:
        raise InvalidParameter("n must be an integer >= 10")
    if not 0.0 < tau <= 1.0:
        raise InvalidParameter("tau must lie in (0, 1]")
    n = int(n)
    rng = np.random.default_rng(seed)
    m_b = bottleneck_count(n)
    C = _incidence(rng, n, m_b)
    u = rng.uniform(0.8, 1.2, size=n)
    D = 0.6 * u.sum()
    y_int = 0.15 * u
    if y_int.sum() >= 0.5 * D:
        y_int *= 0.49 * D / y_int.sum()
    r = C @ u
    c = C @ y_int
    d_tilde = rng.uniform(0.45, 0.65, size=m_b) * r
    d = np.maximum(d_tilde, (1.35 * c + 1e-3) / tau)
    ell = rng.uniform(0.5, 2.0, size=n)
    q = rng.uniform(0.1, 0.5, size=n)
    V = rng.normal(0.0, 0.25, size=(n, 3))
    x0 = np.full(n, 0.5)
    return TollInstance(
        n=n, seed=int(seed), tau=float(tau), C=C, u=u, ell=ell, q=q, d=d, V=V,
        D=float(D), R_tar=float(0.25 * D * x0.mean()), kappa=1.0, beta=1.0,
        rho_rev=1e-2, rho_x=1e-3, x0=x0, y_int=y_int,
    )


def toll_polytope(ti: TollInstance) -> Polytope:
    n = ti.n
    I = np.eye(n)
    A = np.vstack([I, -I, ti.C, np.ones((1, n))])
    b = np.concatenate([ti.u, np.zeros(n), ti.tau * ti.d, [ti.D]])
    sbar = np.concatenate([ti.u, ti.u, ti.tau * ti.d, [ti.D]])
    return Polytope(A, b, ti.y_int.copy(), sbar)


def toll_bilevel_instance(ti: TollInstance):
    """Polytope and bilevel instance for one generated toll problem."""
    P = toll_polytope(ti)
    n = ti.n
    Q = ti.Q
    ell, D, kap, beta = ti.ell, ti.D, ti.kappa, ti.beta
    rho_rev, rho_x, R = ti.rho_rev, ti.rho_x, ti.R_tar
    ones = np.ones(n)

    def f_value(x, y):
        return (ell @ y + 0.5 * y @ Q @ y + beta * (D - y.sum()) ** 2
                + rho_rev * (x @ y - R) ** 2 + 0.5 * rho_x * (x @ x))

    def f_grad_x(x, y):
        return 2.0 * rho_rev * (x @ y - R) * y + rho_x * x

    def f_grad_y(x, y):
        return ell + Q @ y - 2.0 * beta * (D - y.sum()) * ones + 2.0 * rho_rev * (x @ y - R) * x

    def f_hess_yy(x, y):
        return Q + 2.0 * beta * np.outer(ones, ones) + 2.0 * rho_rev * np.outer(x, x)

    def g_value(x, y):
        return ell @ y + 0.5 * y @ Q @ y + x @ y + 0.5 * kap * (D - y.sum()) ** 2

    def g_grad_x(x, y):
        return np.array(y, dtype=float)

    def g_grad_y(x, y):
        return ell + Q @ y + x - kap * (D - y.sum()) * ones

    G_yy = Q + kap * np.outer(ones, ones)
    eye = np.eye(n)

    def g_hess_yy(x, y):
        return G_yy

    def g_hess_xy(x, y):
        return eye

    consts = declared_constants(ti)
    inst = BilevelInstance(
        dim_x=n, dim_y=n,
        f_value=f_value, f_grad_x=f_grad_x, f_grad_y=f_grad_y,
        g_value=g_value, g_grad_x=g_grad_x, g_grad_y=g_grad_y,
        rho_g=float(np.linalg.eigvalsh(Q)[0]), polytope=P,
        g_hess_yy=g_hess_yy, g_hess_xy=g_hess_xy, f_hess_yy=f_hess_yy,
        name=f"toll-n{n}-s{ti.seed}", **consts,
    )
    return P, inst


def declared_constants(ti: TollInstance) -> dict:
    """Conservative Euclidean bounds over ``x`` in the toll box and ``y`` in ``Y(tau)``.

    Uses ``0 <= y <= u`` and ``0 <= x <= 10`` componentwise.
    """
    n = ti.n
    Q = ti.Q
    lam_Q = float(np.linalg.eigvalsh(Q)[-1])
    u_norm = float(np.linalg.norm(ti.u))
    x_max = X_BOX[1]
    x_norm = x_max * math.sqrt(n)
    rev = max(abs(x_max * ti.u.sum() - ti.R_tar), ti.R_tar)  # |x^T y - R_tar|
    f_y = (float(np.linalg.norm(ti.ell)) + lam_Q * u_norm
           + 2.0 * ti.beta * ti.D * math.sqrt(n) + 2.0 * ti.rho_rev * rev * x_norm)
    f_x = 2.0 * ti.rho_rev * rev * u_norm + ti.rho_x * x_norm
    l_f1_yy = lam_Q + 2.0 * ti.beta * n + 2.0 * ti.rho_rev * x_norm**2
    l_f1_xx = 2.0 * ti.rho_rev * u_norm**2 + ti.rho_x
    return {
        "l_f0": math.hypot(f_y, f_x),
        "l_f1": l_f1_yy + l_f1_xx,
        "l_g0": u_norm,
        "l_g1": lam_Q + ti.kappa * n,
    }


def toll_local_constants(ti: TollInstance, mu: float, eta: float,
                         P: Optional[Polytope] = None) -> LocalConstants:
    P = toll_polytope(ti) if P is None else P
    return default_local_constants(mu, eta, declared_constants(ti), poly.euclidean_dikin_kappa(P))


def certified_toll_schedule(ti: TollInstance, mu: float = 1e-3, eta: float = 0.25, T: int = 3,
                            safety: float = 0.9, constants: Optional[LocalConstants] = None):
    """Certified deterministic schedule for this instance; returns ``(schedule, constants)``."""
    c = toll_local_constants(ti, mu, eta) if constants is None else constants
    return certified_polynomial_schedule(c, T, eta, mu, safety=safety), c


def constant_schedule(K: int, alpha: float, gamma: float, lam: float, xi: float, T: int,
                      eta: float, mu: float):
    """Explicit schedule with fixed steps and multiplier (``delta = 0``)."""
    return make_schedule("explicit", alpha, gamma, lam, 1.0, xi, T, eta, mu,
                         alphas=[alpha] * K, gammas=[gamma] * K, lambdas=[lam] * (K + 1))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def original_objective(ti: TollInstance, x, inst: Optional[BilevelInstance] = None,
                       mu_ref: float = 1e-10, tol: float = 1e-10) -> float:
    """``F_orig(x) = f(x, y*(x))`` with ``y*`` the constrained lower minimizer."""
    if inst is None:
        inst = toll_bilevel_instance(ti)[1]
    return reference_constrained_solution(inst, np.asarray(x, float), mu_ref, tol)[1]


def normalized_gap(F_orig: float, F_ref: float) -> float:
    return (F_orig - F_ref) / max(GAP_FLOOR, GAP_REL * abs(F_ref))


def toll_normalized_gap(ti: TollInstance, x_final, F_ref: float,
                        inst: Optional[BilevelInstance] = None) -> float:
    return normalized_gap(original_objective(ti, x_final, inst), F_ref)


def hypergradient_descent(ti: TollInstance, mu: float = 1e-3, max_iter: int = 25_000,
                          mu_start: float = 1e-1, tol: float = 1e-10):
    """Box-constrained quasi-Newton descent on ``F_mu`` with exact hypergradients.

    Follows ``mu`` from ``mu_start`` down to ``mu`` by factors of 10, warm
    starting each stage. Returns the final ``x``.
    """
    _, inst = toll_bilevel_instance(ti)
    x = ti.x0.copy()
    bounds = [X_BOX] * ti.n
    mus = []
    m = mu_start
    while m > mu * (1 + 1e-12):
        mus.append(m)
        m /= 10.0
    mus.append(mu)
    for m in mus:
        bp = BarrierProblem(inst, m)
        cache = {"y": None}

        def fun(xv, bp=bp, cache=cache):
            g, y = exact_hypergradient(bp, xv, tol, cache["y"], return_center=True)
            cache["y"] = y
            return inst.f_value(xv, y), g

        res = scipy.optimize.minimize(fun, x, jac=True, method="L-BFGS-B", bounds=bounds,
                                      options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10})
        x = res.x
    return x


@dataclass
class TollRunResult:
    x_final: np.ndarray
    trace: Optional[RunTrace]
    iterations: int
    wall_time_ms: float
    status: str


def run_bmfo_toll(ti: TollInstance, schedule, K: int, budget_ms: Optional[float] = None,
                  inst: Optional[BilevelInstance] = None) -> TollRunResult:
    """BMFO with tolls projected onto the box, under an iteration and optional time budget.

    The budget is checked between completed outer updates, so one update may
    overrun it. ``status`` is ``ok`` or ``budget-censored``.
    """
    if inst is None:
        inst = toll_bilevel_instance(ti)[1]
    bp = BarrierProblem(inst, schedule.mu)
    if budget_ms is not None and budget_ms <= 0:
        return TollRunResult(ti.x0.copy(), None, 0, 0.0, "budget-censored")
    t0 = time.monotonic()
    def over_budget():
        return (time.monotonic() - t0) * 1e3 >= budget_ms

    trace = run(bp, schedule, ti.x0, K, x_box=X_BOX, stop=None if budget_ms is None else over_budget)
    done = trace.K
    elapsed = (time.monotonic() - t0) * 1e3
    status = "ok" if done == K else "budget-censored"
    return TollRunResult(trace.records[-1].x.copy(), trace, done, elapsed, status)


def reference_pool(ti: TollInstance, mu: float = 1e-3, test_iterations: int = 500,
                   bmfo_schedule=None, bmfo_iterations: Optional[int] = None):
    """Best ``F_orig`` among the reference runs.

    Members: quasi-Newton exact-hypergradient descent (with ``mu``
    continuation, capped at 50x the test budget) and, when a schedule is
    given, a long BMFO run. Returns ``(F_ref, {member: F_orig})``.
    """
    _, inst = toll_bilevel_instance(ti)
    values = {}
    x_hg = hypergradient_descent(ti, mu, max_iter=50 * test_iterations)
    values["exact_hg_barrier"] = original_objective(ti, x_hg, inst)
    if bmfo_schedule is not None:
        K = bmfo_iterations if bmfo_iterations is not None else 50 * test_iterations
        res = run_bmfo_toll(ti, bmfo_schedule, K, inst=inst)
        values["bmfo_long"] = original_objective(ti, res.x_final, inst)
    return min(values.values()), values


def smoothed_objective(ti: TollInstance, x, mu: float = 1e-3,
                       inst: Optional[BilevelInstance] = None) -> float:
    if inst is None:
        inst = toll_bilevel_instance(ti)[1]
    return smoothed_value(BarrierProblem(inst, mu), np.asarray(x, float))


def certify_toll(ti: TollInstance, schedule, K: int, constants: Optional[LocalConstants] = None):
    c = toll_local_constants(ti, schedule.mu, schedule.eta) if constants is None else constants
    return certify_barrier_aware(schedule, c, K)
