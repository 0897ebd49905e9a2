"""Barrier-metric first-order bilevel solver, schedules and schedule certification.

Each outer iteration runs two inner trackers for ``T`` steps with the
barrier Hessian frozen at the tracker's starting point:

* exact tracker ``z``: ``z <- z - gamma_k H(z_k)^{-1} grad_y psi_mu(x_k, z)``
* proxy tracker ``y``: ``y <- y - alpha_k H(y_k)^{-1} (grad_y f + lam_k grad_y psi_mu)``

then moves ``x`` along the first-order proxy direction
``q = grad_x f(x, y) + lam_k (grad_x g(x, y) - grad_x g(x, z))`` with step
``xi * alpha_k`` and grows the multiplier by ``delta_k``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import polytope as poly
from .barrier import (
    BarrierProblem,
    psi_grad_y,
    solve_exact_center,
    solve_proxy_center,
)
from .errors import InvalidParameter

GUARD_FRACTION = 0.99  # new slacks stay >= 1% of current slacks

KINDS = ("deterministic_polynomial", "stochastic_polynomial", "explicit")


# --------------------------------------------------------------------------
# schedules
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    kind: str
    alpha0: float
    gamma0: float
    lambda0: float
    k0: float
    xi: float
    T: int
    eta: float
    mu: float
    alphas: Optional[tuple] = None
    gammas: Optional[tuple] = None
    lambdas: Optional[tuple] = None

    def to_dict(self) -> dict:
        doc = asdict(self)
        for key in ("alphas", "gammas", "lambdas"):
            if doc[key] is None:
                del doc[key]
            else:
                doc[key] = list(doc[key])
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        keys = ("alpha0", "gamma0", "lambda0", "k0", "xi", "T", "eta", "mu")
        try:
            args = {k: doc[k] for k in keys}
        except KeyError as exc:
            raise InvalidParameter(f"schedule is missing {exc}") from None
        return make_schedule(doc.get("kind", "deterministic_polynomial"), **args,
                             alphas=doc.get("alphas"), gammas=doc.get("gammas"),
                             lambdas=doc.get("lambdas"))


def make_schedule(kind, alpha0, gamma0, lambda0, k0, xi, T, eta, mu,
                  alphas=None, gammas=None, lambdas=None) -> Schedule:
    """Validate parameters and build a :class:`Schedule`.

    ``xi = 0`` is accepted (frozen outer variable); every other scalar must
    be positive. ``explicit`` schedules take per-iteration sequences.
    """
    if kind not in KINDS:
        raise InvalidParameter(f"unknown schedule kind {kind!r}")
    if int(T) != T or T < 1:
        raise InvalidParameter("T must be an integer >= 1")
    if not 0.0 < eta < 0.5:
        raise InvalidParameter("eta must lie in (0, 1/2)")
    if xi < 0:
        raise InvalidParameter("xi must be nonnegative")
    if not mu > 0:
        raise InvalidParameter("mu must be positive")
    if kind == "explicit":
        if alphas is None or gammas is None or lambdas is None:
            raise InvalidParameter("explicit schedules need alphas, gammas and lambdas")
        alphas, gammas, lambdas = (tuple(float(v) for v in seq) for seq in (alphas, gammas, lambdas))
        if not len(alphas) == len(gammas) == len(lambdas) - 1 or len(alphas) == 0:
            raise InvalidParameter("explicit schedule needs len(lambdas) == len(alphas) + 1")
        if min(alphas) < 0 or min(gammas) < 0 or min(lambdas) <= 0:
            raise InvalidParameter("explicit schedule values must be nonnegative")
        if any(b < a for a, b in zip(lambdas, lambdas[1:])):
            raise InvalidParameter("multiplier sequence must be nondecreasing")
        alpha0, gamma0, lambda0 = alphas[0], gammas[0], lambdas[0]
    for name, val in (("alpha0", alpha0), ("gamma0", gamma0), ("lambda0", lambda0), ("k0", k0)):
        if not val > 0:
            raise InvalidParameter(f"{name} must be positive")
    return Schedule(kind, float(alpha0), float(gamma0), float(lambda0), float(k0),
                    float(xi), int(T), float(eta), float(mu), alphas, gammas, lambdas)


def _lambda(schedule: Schedule, k: int) -> float:
    s = schedule
    if s.kind == "deterministic_polynomial":
        return s.lambda0 * ((k + s.k0) / s.k0) ** (1.0 / 3.0)
    if s.kind == "stochastic_polynomial":
        return s.lambda0 * ((k + s.k0) / s.k0) ** (1.0 / 5.0)
    return s.lambdas[k]


def schedule_at(schedule: Schedule, k: int):
    """Return ``(alpha_k, gamma_k, lambda_k, delta_k)``."""
    s = schedule
    if k < 0:
        raise InvalidParameter("iteration index must be nonnegative")
    if s.kind == "deterministic_polynomial":
        alpha = s.alpha0 / (k + s.k0) ** (1.0 / 3.0)
        gamma = s.gamma0
    elif s.kind == "stochastic_polynomial":
        alpha = s.alpha0 / (k + s.k0) ** (3.0 / 5.0)
        gamma = s.gamma0 / (k + s.k0) ** (2.0 / 5.0)
    else:
        if k >= len(s.alphas):
            raise InvalidParameter(f"explicit schedule has no entry for k={k}")
        alpha, gamma = s.alphas[k], s.gammas[k]
    lam = _lambda(s, k)
    return alpha, gamma, lam, _lambda(s, k + 1) - lam


def schedule_arrays(schedule: Schedule, K: int):
    """Vectors of ``alpha_k, gamma_k, lambda_k, delta_k`` for ``k < K``."""
    rows = np.array([schedule_at(schedule, k) for k in range(K)], dtype=float).reshape(K, 4)
    return rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]


# --------------------------------------------------------------------------
# local constants and certification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalConstants:
    """Analysis constants entering the barrier-aware conditions.

    Euclidean bounds: ``l_f0, l_f1, l_g0, l_g1``. Local Dikin versions carry
    the ``_eta`` suffix. ``defaulted`` names entries filled with the
    conservative defaults rather than derived or supplied values.
    """

    rho_psi: float
    l_psi1: float
    l_psi2: float
    l_f0: float
    l_f1: float
    l_g0: float
    l_g1: float
    l_f0_eta: float
    l_f1_eta: float
    l_f2_eta: float
    L_F: float
    l_star0: float
    l_lambda0: float
    l_star1: float
    c_x: float
    c_xi: float = 0.01
    defaulted: tuple = ()

    def __post_init__(self):
        for name in ("rho_psi", "l_psi1", "l_psi2", "l_star0", "l_lambda0", "l_star1", "c_xi"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive")
        for name in ("l_f0", "l_f1", "l_g0", "l_g1", "l_f0_eta", "l_f1_eta", "l_f2_eta", "L_F", "c_x"):
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} must be nonnegative")
        if self.rho_psi > self.l_psi1:
            raise InvalidParameter("rho_psi cannot exceed l_psi1")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["defaulted"] = list(self.defaulted)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "LocalConstants":
        doc = dict(doc)
        doc["defaulted"] = tuple(doc.get("defaulted", ()))
        return cls(**doc)


def default_local_constants(mu: float, eta: float, declared: dict, kappa: float,
                            l_psi2=None, l_f2_eta=None, l_star1=None,
                            c_xi=None) -> LocalConstants:
    """Explicit constants from the closed forms of the constants table.

    ``declared`` holds the Euclidean bounds ``l_g1, l_f0, l_f1, l_g0``.
    Entries without a closed form take the supplied value or a conservative
    default (``l_psi2 = 10 l_psi1``, ``l_f2_eta = 10 l_f1_eta``,
    ``l_star1 = max(1, l_lambda0)``, ``c_xi = 0.01``).
    """
    if not 0.0 < eta < 0.5:
        raise InvalidParameter("eta must lie in (0, 1/2)")
    if not mu > 0 or kappa < 1:
        raise InvalidParameter("need mu > 0 and kappa >= 1")
    try:
        l_g1, l_f0, l_f1, l_g0 = (float(declared[k]) for k in ("l_g1", "l_f0", "l_f1", "l_g0"))
    except KeyError as exc:
        raise InvalidParameter(f"declared constants are missing {exc}") from None
    if min(l_g1, l_f0, l_f1, l_g0) < 0 or l_g1 == 0:
        raise InvalidParameter("declared constants must be nonnegative with l_g1 > 0")

    shrink = (1.0 - 2.0 * eta) ** 2
    rho = mu * shrink
    l_psi1 = kappa**2 * l_g1 + mu / shrink
    l_f0_eta = kappa * l_f0
    l_f1_eta = kappa**2 * l_f1
    l_lambda0 = 3.0 * l_psi1 / rho
    l_star0 = 1.0 + 3.0 * l_psi1 / rho

    defaulted = []
    if l_psi2 is None:
        l_psi2 = 10.0 * l_psi1
        defaulted.append("l_psi2")
    if l_f2_eta is None:
        l_f2_eta = 10.0 * l_f1_eta
        defaulted.append("l_f2_eta")
    if l_star1 is None:
        l_star1 = max(1.0, l_lambda0)
        defaulted.append("l_star1")
    if c_xi is None:
        c_xi = 0.01
        defaulted.append("c_xi")

    L_F = (l_f1 + l_psi1 * l_f1_eta / rho + 2.0 * l_psi1 * l_psi2 * l_f0_eta / rho**2) * l_star0
    c_x = 2.0 * l_psi1 * l_f0_eta / rho**2 * (l_f1_eta + l_psi2 * l_f0_eta / rho)
    return LocalConstants(
        rho_psi=rho, l_psi1=l_psi1, l_psi2=float(l_psi2),
        l_f0=l_f0, l_f1=l_f1, l_g0=l_g0, l_g1=l_g1,
        l_f0_eta=l_f0_eta, l_f1_eta=l_f1_eta, l_f2_eta=float(l_f2_eta),
        L_F=L_F, l_star0=l_star0, l_lambda0=l_lambda0, l_star1=float(l_star1),
        c_x=c_x, c_xi=float(c_xi), defaulted=tuple(defaulted),
    )


def certified_polynomial_schedule(constants: LocalConstants, T: int, eta: float, mu: float,
                                  gamma: Optional[float] = None, xi: Optional[float] = None,
                                  safety: float = 0.9) -> Schedule:
    """Deterministic polynomial schedule placed strictly inside the barrier-aware caps.

    ``lambda_0`` sits 1% above its floor; ``gamma`` defaults to ``safety``
    times its cap. Under this schedule ``beta_k = alpha_k lambda_k`` equals
    ``alpha_0 lambda_0 / k0^{1/3}`` for every ``k``; it is set to
    ``safety * gamma`` and ``k0`` is chosen so the multiplier-growth
    condition holds at ``k = 0``, its tightest index. ``xi`` defaults to
    ``safety`` times the smaller of its two caps.
    """
    c = constants
    if not 0 < safety < 1:
        raise InvalidParameter("safety must lie in (0, 1)")
    lam0 = 1.01 * max(2.0 * c.l_f1_eta / c.rho_psi, 8.0 * c.l_f0_eta / (eta * c.rho_psi))
    if gamma is None:
        gamma = safety * min(1.0 / (4.0 * c.l_psi1), 1.0 / (4.0 * T * c.rho_psi))
    beta = safety * gamma
    # delta_0 / lambda_0 <= 1 / (3 k0) <= T rho beta / 16
    k0 = math.ceil(16.0 / (3.0 * T * c.rho_psi * beta * safety))
    alpha0 = beta * k0 ** (1.0 / 3.0) / lam0
    if xi is None:
        drift = c.l_f0 / lam0 + 2.0 * c.l_g0
        s3 = min(eta * c.rho_psi / (16.0 * c.l_star0 * drift),
                 eta * c.rho_psi / (64.0 * c.l_lambda0 * drift),
                 c.c_xi * c.rho_psi / max(c.l_psi1 * c.l_star0**2, c.l_star1 * max(c.l_g0, c.l_f0)))
        xi = safety * s3 * T
        alpha_max = alpha0 / k0 ** (1.0 / 3.0)
        if c.L_F > 0:
            xi = min(xi, safety / (2.0 * alpha_max * c.L_F))
    return make_schedule("deterministic_polynomial", alpha0, gamma, lam0, k0, xi, T, eta, mu)


@dataclass(frozen=True)
class ConditionCheck:
    """One inequality family ``lhs_k <= rhs_k`` checked for every ``k < K``.

    ``margin`` is ``min_k rhs_k / lhs_k`` (infinite when every lhs is zero).
    """

    name: str
    condition: str
    passed: bool
    first_violation: Optional[int]
    margin: float
    note: str = ""

    def verdict(self) -> str:
        if not self.passed:
            return "FAIL"
        return "pass(inf)" if math.isinf(self.margin) else "pass"


@dataclass(frozen=True)
class CertificationReport:
    K: int
    checks: tuple
    conditional_on: tuple = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def condition_passed(self, condition: str) -> bool:
        return all(c.passed for c in self.checks if c.condition == condition)

    def failing_conditions(self) -> List[str]:
        return sorted({c.condition for c in self.checks if not c.passed})

    def table(self) -> str:
        lines = [f"{'check':<18} {'cond':<4} {'result':<10} {'first_k':>8} {'margin':>12}  note"]
        for c in self.checks:
            first = "-" if c.first_violation is None else str(c.first_violation)
            margin = "inf" if math.isinf(c.margin) else f"{c.margin:.4g}"
            lines.append(f"{c.name:<18} {c.condition:<4} {c.verdict():<10} {first:>8} {margin:>12}  {c.note}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} (K={self.K})")
        if self.conditional_on:
            lines.append("conditional on default constants: " + ", ".join(self.conditional_on))
        return "\n".join(lines)


def _check(name, condition, lhs, rhs, note="") -> ConditionCheck:
    lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
    ok = lhs <= rhs
    bad = np.flatnonzero(~ok)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(lhs > 0, rhs / np.where(lhs > 0, lhs, 1.0), np.inf)
    return ConditionCheck(name, condition, bool(ok.all()),
                          int(bad[0]) if bad.size else None, float(ratios.min()), note)


def certify_barrier_aware(schedule: Schedule, constants: LocalConstants, K: int) -> CertificationReport:
    """Evaluate the three barrier-aware schedule conditions for ``k < K``."""
    c = constants
    s = schedule
    eta, T, xi = s.eta, s.T, s.xi
    alpha, gamma, lam, delta = schedule_arrays(s, K)
    beta = alpha * lam
    lam0 = lam[0]

    lam_floor = max(2.0 * c.l_f1_eta / c.rho_psi, 8.0 * c.l_f0_eta / (eta * c.rho_psi))
    gamma_cap = min(1.0 / (4.0 * c.l_psi1), 1.0 / (4.0 * T * c.rho_psi))
    alpha_cap = np.inf if xi * c.L_F == 0 else 1.0 / (2.0 * xi * c.L_F)

    drift = c.l_f0 / lam0 + 2.0 * c.l_g0
    with np.errstate(divide="ignore"):
        terms = [
            eta * c.rho_psi / (16.0 * c.l_star0 * drift) if drift > 0 else np.inf,
            eta * c.rho_psi / (64.0 * c.l_lambda0 * drift) if drift > 0 else np.inf,
            c.c_xi * c.rho_psi / max(c.l_psi1 * c.l_star0**2,
                                     c.l_star1 * math.sqrt(max(c.l_g0**2, c.l_f0**2))),
        ]
    s3_cap = min(terms)

    checks = (
        # lambda_0 >= floor  <=>  floor <= lambda_0
        _check("lambda0_floor", "S1", np.full(K, lam_floor), lam0),
        _check("beta_le_gamma", "S1", beta, gamma),
        _check("gamma_cap", "S1", gamma, gamma_cap),
        _check("alpha_cap", "S1", alpha, alpha_cap),
        _check("multiplier_growth", "S2", np.maximum(delta, 0.0) / lam, T * c.rho_psi * beta / 16.0),
        _check("delta_nonneg", "S2", -delta, np.zeros(K)),
        _check("xi_over_T", "S3", np.full(K, xi / T), s3_cap,
               note="uses c_xi=%g" % c.c_xi),
    )
    return CertificationReport(K, checks, tuple(c.defaulted))


# --------------------------------------------------------------------------
# the algorithm
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverState:
    k: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    lam: float


@dataclass
class GuardStats:
    """Counts step-guard activations (fraction-to-boundary damping)."""

    activations: int = 0


@dataclass
class TraceRecord:
    k: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    lam: float
    alpha: float = float("nan")
    gamma: float = float("nan")
    q_norm: float = float("nan")
    guard_exact: int = 0
    guard_proxy: int = 0


@dataclass
class RunTrace:
    """Per-iteration history: record ``k`` holds state ``k`` and the step taken from it."""

    schedule: Schedule
    records: List[TraceRecord] = field(default_factory=list)
    x_box: Optional[tuple] = None
    notes: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def K(self) -> int:
        return len(self.records) - 1

    @property
    def xs(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def ys(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    @property
    def zs(self) -> np.ndarray:
        return np.array([r.z for r in self.records])

    @property
    def lams(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    @property
    def guard_activations(self) -> int:
        return sum(r.guard_exact + r.guard_proxy for r in self.records)

    def state(self, k: int) -> SolverState:
        r = self.records[k]
        return SolverState(r.k, r.x, r.y, r.z, r.lam)

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule.to_dict(),
            "x_box": None if self.x_box is None else list(self.x_box),
            "notes": list(self.notes),
            "records": [
                {"k": r.k, "x": r.x.tolist(), "y": r.y.tolist(), "z": r.z.tolist(),
                 "lambda": r.lam, "alpha": _json_float(r.alpha), "gamma": _json_float(r.gamma),
                 "q_norm": _json_float(r.q_norm), "guard_exact": r.guard_exact,
                 "guard_proxy": r.guard_proxy}
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunTrace":
        records = [
            TraceRecord(rec["k"], np.asarray(rec["x"], float), np.asarray(rec["y"], float),
                        np.asarray(rec["z"], float), rec["lambda"], _nan(rec["alpha"]),
                        _nan(rec["gamma"]), _nan(rec["q_norm"]), rec["guard_exact"],
                        rec["guard_proxy"])
            for rec in doc["records"]
        ]
        box = doc.get("x_box")
        return cls(Schedule.from_dict(doc["schedule"]), records,
                   None if box is None else tuple(box), list(doc.get("notes", [])))


def _json_float(v):
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)


def _nan(v):
    return float("nan") if v is None else float(v)


def proxy_direction(instance, lam: float, x, y, z, f_grad_x=None) -> np.ndarray:
    """First-order outer direction ``grad_x f(x,y) + lam (grad_x g(x,y) - grad_x g(x,z))``."""
    fx = instance.f_grad_x(x, y) if f_grad_x is None else f_grad_x
    if lam == 0:
        return np.asarray(fx, dtype=float)
    return fx + lam * (instance.g_grad_x(x, y) - instance.g_grad_x(x, z))


def _frozen_loop(P, grad, start, step, T, stats: Optional[GuardStats]):
    start = np.asarray(start, dtype=float)
    anchor = poly.make_anchor(P, start)
    y = start.copy()
    if step == 0:
        return y
    for _ in range(T):
        d = -step * anchor.solve(grad(y))
        t = poly.max_step_to_boundary(P, y, d, GUARD_FRACTION)
        if t < 1.0:
            d = t * d
            if stats is not None:
                stats.activations += 1
        y = y + d
    return y


def frozen_inner_loop_exact(bp: BarrierProblem, x, z_start, gamma: float, T: int,
                            stats: Optional[GuardStats] = None) -> np.ndarray:
    """``T`` exact-tracker steps preconditioned by the barrier Hessian at ``z_start``."""
    x = np.asarray(x, dtype=float)
    return _frozen_loop(bp.polytope, lambda z: psi_grad_y(bp, x, z), z_start, gamma, T, stats)


def frozen_inner_loop_proxy(bp: BarrierProblem, lam: float, x, y_start, alpha: float, T: int,
                            f_grad_source=None, stats: Optional[GuardStats] = None) -> np.ndarray:
    """``T`` proxy-tracker steps; ``f_grad_source`` supplies (possibly noisy) ``grad_y f``."""
    src = bp.instance if f_grad_source is None else f_grad_source
    x = np.asarray(x, dtype=float)

    def grad(y):
        return src.f_grad_y(x, y) + lam * psi_grad_y(bp, x, y)

    return _frozen_loop(bp.polytope, grad, y_start, alpha, T, stats)


def _project(x, x_box):
    if x_box is None:
        return x
    return np.clip(x, x_box[0], x_box[1])


def _outer_step(bp, schedule, state: SolverState, f_grad_source=None, x_box=None):
    src = bp.instance if f_grad_source is None else f_grad_source
    alpha, gamma, _, delta = schedule_at(schedule, state.k)
    lam = state.lam
    T = schedule.T
    g_exact, g_proxy = GuardStats(), GuardStats()
    z_next = frozen_inner_loop_exact(bp, state.x, state.z, gamma, T, g_exact)
    y_next = frozen_inner_loop_proxy(bp, lam, state.x, state.y, alpha, T, src, g_proxy)
    q = proxy_direction(bp.instance, lam, state.x, y_next, z_next,
                        f_grad_x=src.f_grad_x(state.x, y_next))
    x_next = _project(state.x - schedule.xi * alpha * q, x_box)
    new = SolverState(state.k + 1, x_next, y_next, z_next, lam + delta)
    info = dict(alpha=alpha, gamma=gamma, q_norm=float(np.linalg.norm(q)),
                guard_exact=g_exact.activations, guard_proxy=g_proxy.activations)
    return new, info


def outer_iteration(bp: BarrierProblem, schedule: Schedule, state: SolverState,
                    f_grad_source=None, x_box=None) -> SolverState:
    """One outer iteration: both frozen inner loops, the ``x`` step and the multiplier update."""
    return _outer_step(bp, schedule, state, f_grad_source, x_box)[0]


def warm_starts(bp: BarrierProblem, schedule: Schedule, x0, tol_scale: float = 0.5):
    """Exact and proxy warm starts at ``x0``.

    Stationarity tolerances are ``tol_scale * eta`` times the curvature
    lower bound of each objective in the Dikin metric (``rho_psi`` for the
    exact center and ``lambda0 * rho_psi`` for the proxy center), so that the
    returned points lie inside the ``eta``-neighborhoods.
    """
    rho = schedule.mu * (1 - 2 * schedule.eta) ** 2
    tol = tol_scale * schedule.eta * rho
    z0 = solve_exact_center(bp, x0, None, tol).y_star
    y0 = solve_proxy_center(bp, schedule.lambda0, x0, z0, tol * schedule.lambda0).y_star
    return y0, z0


def run(bp: BarrierProblem, schedule: Schedule, x0, K: int, y0=None, z0=None,
        f_grad_source=None, x_box=None, stop: Optional[Callable[[], bool]] = None) -> RunTrace:
    """Run ``K`` outer iterations and return the full trace (``K + 1`` records).

    ``stop`` is polled before each outer iteration; returning True ends the
    run early with a shorter trace.
    """
    if K < 0:
        raise InvalidParameter("K must be nonnegative")
    if not math.isclose(schedule.mu, bp.mu, rel_tol=1e-12):
        raise InvalidParameter(f"schedule mu={schedule.mu} differs from problem mu={bp.mu}")
    x0 = np.asarray(x0, dtype=float).copy()
    if y0 is None or z0 is None:
        y_ws, z_ws = warm_starts(bp, schedule, x0)
        y0 = y_ws if y0 is None else y0
        z0 = z_ws if z0 is None else z0
    P = bp.polytope
    y0 = np.asarray(y0, dtype=float).copy()
    z0 = np.asarray(z0, dtype=float).copy()
    poly.interior_slacks(P, y0)
    poly.interior_slacks(P, z0)

    trace = RunTrace(schedule, x_box=None if x_box is None else tuple(x_box))
    if x_box is not None:
        trace.notes.append(f"x projected onto box [{x_box[0]}, {x_box[1]}] after each outer step")
    state = SolverState(0, x0, y0, z0, schedule_at(schedule, 0)[2])
    trace.records.append(TraceRecord(0, state.x, state.y, state.z, state.lam))
    for _ in range(K):
        if stop is not None and stop():
            break
        state, info = _outer_step(bp, schedule, state, f_grad_source, x_box)
        prev = trace.records[-1]
        prev.alpha, prev.gamma, prev.q_norm = info["alpha"], info["gamma"], info["q_norm"]
        prev.guard_exact, prev.guard_proxy = info["guard_exact"], info["guard_proxy"]
        trace.records.append(TraceRecord(state.k, state.x, state.y, state.z, state.lam))
    return trace
