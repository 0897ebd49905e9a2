"""Two-dimensional boundary-stability example on an irregular hexagon.

The lower objective is ``g(x, y) = 1/2 (y - c(x))^T Q (y - c(x))`` with a
linear center path ``c(x) = (1 - x) c_start + x c_end`` that leaves the
hexagon through its right slanted face, dragging the barrier center toward
that face. A barrier-metric exact tracker and a fixed-step Euclidean
tracker follow the center along a grid in ``x``; the anchored Dikin error
tells whether each stays inside the ``eta``-tube.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .. import polytope as poly
from ..barrier import BarrierProblem, psi_grad_y, psi_hess_yy, psi_value, solve_exact_center
from ..bmfo import (
    GuardStats,
    LocalConstants,
    RunTrace,
    TraceRecord,
    certified_polynomial_schedule,
    default_local_constants,
    frozen_inner_loop_exact,
)
from ..diagnostics import TubeReport, anchored_error, build_tube_report
from ..errors import InvalidConfig
from ..polytope import Polytope
from ..problem import AffineMap, quadratic_instance

# Small enough that every slack bound stays below sqrt(3), so the Euclidean
# and Dikin metrics compare with constant 1.
DEFAULT_VERTICES = (
    (0.8, 0.0), (0.48, 0.64), (-0.32, 0.72), (-0.76, 0.16), (-0.52, -0.56), (0.36, -0.68),
)


@dataclass(frozen=True)
class HexagonConfig:
    vertices: tuple = DEFAULT_VERTICES
    Q: tuple = ((1.2, 0.15), (0.15, 0.8))
    mu: float = 5e-4
    c_start: tuple = (0.68, 0.17)
    c_end: tuple = (0.59, 0.46)
    K: int = 2000
    T: int = 30
    eta: float = 0.25
    gamma_euclidean_factor: float = 0.7
    gamma_barrier: float = 0.18
    oracle_tol: float = 1e-11

    def validate(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.shape != (6, 2):
            raise InvalidConfig("hexagon needs exactly 6 two-dimensional vertices")
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (2, 2) or not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q)[0] <= 0:
            raise InvalidConfig("Q must be a symmetric positive definite 2x2 matrix")
        if self.K < 2 or self.T < 1:
            raise InvalidConfig("need K >= 2 grid points and T >= 1 inner steps")
        if not 0 < self.eta < 0.5 or self.mu <= 0 or self.gamma_barrier <= 0:
            raise InvalidConfig("need 0 < eta < 1/2, mu > 0 and gamma_barrier > 0")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["vertices"] = [list(v) for v in self.vertices]
        doc["Q"] = [list(r) for r in self.Q]
        doc["c_start"] = list(self.c_start)
        doc["c_end"] = list(self.c_end)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "HexagonConfig":
        doc = dict(doc)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"unknown hexagon fields: {sorted(unknown)}")
        for key in ("vertices", "Q"):
            if key in doc:
                doc[key] = tuple(tuple(float(v) for v in row) for row in doc[key])
        for key in ("c_start", "c_end"):
            if key in doc:
                doc[key] = tuple(float(v) for v in doc[key])
        cfg = cls(**doc)
        cfg.validate()
        return cfg


def hexagon_polytope(vertices) -> Polytope:
    """Halfspace form of a convex polygon with unit outward normals.

    Vertices may be given in either orientation. Slack upper bounds are the
    exact maxima over the vertices.
    """
    V = np.asarray(vertices, dtype=float)
    n = len(V)
    area2 = sum(V[i, 0] * V[(i + 1) % n, 1] - V[(i + 1) % n, 0] * V[i, 1] for i in range(n))
    if area2 < 0:
        V = V[::-1]
    A, b = [], []
    for i in range(n):
        e = V[(i + 1) % n] - V[i]
        normal = np.array([e[1], -e[0]]) / np.hypot(*e)
        A.append(normal)
        b.append(normal @ V[i])
    A, b = np.array(A), np.array(b)
    if np.any(A @ V.T - b[:, None] > 1e-9):
        raise InvalidConfig("hexagon vertices are not in convex position")
    centroid = V.mean(axis=0)
    sbar = np.max(b[:, None] - A @ V.T, axis=1)
    return Polytope(A, b, centroid, sbar)


def build_hexagon_example(cfg: HexagonConfig = HexagonConfig()):
    """Polytope, bilevel instance and outer grid ``x_k = k / (K - 1)``.

    The upper objective ``f(x, y) = 1/2 ||y - c_end||^2`` is auxiliary (only
    reported, never used to move ``x``).
    """
    cfg.validate()
    P = hexagon_polytope(cfg.vertices)
    c_start = np.asarray(cfg.c_start, dtype=float)
    c_end = np.asarray(cfg.c_end, dtype=float)
    if not poly.is_strict_interior(P, c_start):
        raise InvalidConfig("c_start must be strictly inside the hexagon")
    path = AffineMap((c_end - c_start).reshape(2, 1), c_start)
    inst = quadratic_instance(np.eye(2), c_end, np.asarray(cfg.Q, dtype=float), path, P,
                              name="hexagon")
    grid = np.arange(cfg.K) / (cfg.K - 1)
    return P, inst, grid


def gamma_crit(bp: BarrierProblem, x, y_center) -> float:
    """``2 / lambda_max`` of the barrierized lower Hessian at the center."""
    return 2.0 / float(np.linalg.eigvalsh(psi_hess_yy(bp, np.atleast_1d(x), y_center))[-1])


def euclidean_inner_loop(bp: BarrierProblem, x, z_start, gamma: float, T: int):
    """Plain gradient steps; returns ``None`` once an iterate leaves the interior."""
    z = np.asarray(z_start, dtype=float).copy()
    for _ in range(T):
        z = z - gamma * psi_grad_y(bp, x, z)
        if not poly.is_strict_interior(bp.polytope, z):
            return None
    return z


@dataclass
class HexagonResult:
    config: HexagonConfig
    grid: np.ndarray
    centers: np.ndarray
    barrier_trace: RunTrace
    euclidean_z: np.ndarray
    barrier_tube: TubeReport
    euclidean_tube: TubeReport
    barrier_gap: np.ndarray
    euclidean_gap: np.ndarray
    barrier_f: np.ndarray
    euclidean_f: np.ndarray
    center_f: np.ndarray
    gamma_crit0: float
    gamma_euclidean: float
    guard_activations: int
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "K": self.config.K,
            "T": self.config.T,
            "eta": self.config.eta,
            "mu": self.config.mu,
            "gamma_barrier": self.barrier_trace.schedule.gamma0,
            "gamma_crit0": self.gamma_crit0,
            "gamma_euclidean": self.gamma_euclidean,
            "barrier_first_exit_index": self.barrier_tube.first_exit_index,
            "barrier_max_err": self.barrier_tube.max_exact_err,
            "euclidean_first_exit_index": self.euclidean_tube.first_exit_index,
            "guard_activations": self.guard_activations,
        }


def hexagon_declared_constants(cfg: HexagonConfig) -> dict:
    """Euclidean bounds over the hexagon and ``x`` in ``[0, 1]``.

    Both gradients are affine in ``y`` so their norms peak at vertices.
    """
    V = np.asarray(cfg.vertices, dtype=float)
    Q = np.asarray(cfg.Q, dtype=float)
    c0, c1 = np.asarray(cfg.c_start, float), np.asarray(cfg.c_end, float)
    dc = c1 - c0
    l_f0 = max(float(np.linalg.norm(v - c1)) for v in V)
    # grad_x g = -dc^T Q (y - c(x)), affine in (x, y): extremes at vertex/endpoint pairs
    l_g0 = max(abs(float(dc @ Q @ (v - c))) for v in V for c in (c0, c1))
    return {"l_g1": float(np.linalg.eigvalsh(Q)[-1]), "l_f0": l_f0, "l_f1": 1.0, "l_g0": l_g0}


def hexagon_local_constants(cfg: HexagonConfig) -> LocalConstants:
    P = hexagon_polytope(cfg.vertices)
    return default_local_constants(cfg.mu, cfg.eta, hexagon_declared_constants(cfg),
                                   poly.euclidean_dikin_kappa(P))


def hexagon_schedule(cfg: HexagonConfig, constants: Optional[LocalConstants] = None):
    """Certified schedule with ``gamma = cfg.gamma_barrier``; ``xi = 0`` because ``x`` follows the grid."""
    c = hexagon_local_constants(cfg) if constants is None else constants
    return certified_polynomial_schedule(c, cfg.T, cfg.eta, cfg.mu, gamma=cfg.gamma_barrier, xi=0.0)


def run_hexagon_comparison(cfg: HexagonConfig = HexagonConfig(), schedule=None) -> HexagonResult:
    """Barrier-metric versus fixed-step Euclidean exact tracker along the grid.

    Record 0 is the shared warm start (the exact center at ``x_0``); record
    ``j >= 1`` is the tracker after ``T`` inner steps at grid point ``x_{j-1}``.
    Once the Euclidean tracker leaves the polytope its remaining entries are NaN
    and its error is infinite.
    """
    P, inst, grid = build_hexagon_example(cfg)
    bp = BarrierProblem(inst, cfg.mu)
    tol = cfg.oracle_tol
    schedule = hexagon_schedule(cfg) if schedule is None else schedule
    gamma_b = schedule.gamma0

    xs = np.concatenate([grid[:1], grid])
    centers = np.empty((xs.size, 2))
    yc = P.interior_witness
    for j, x in enumerate(xs):
        yc = solve_exact_center(bp, np.array([x]), yc, tol).y_star
        centers[j] = yc

    g_crit0 = gamma_crit(bp, grid[0], centers[0])
    gamma_e = cfg.gamma_euclidean_factor * g_crit0

    stats = GuardStats()
    trace = RunTrace(schedule, notes=["outer variable follows the prescribed grid x_k = k/(K-1)"])
    zb = centers[0].copy()
    ze = centers[0].copy()
    zb_hist = [zb]
    ze_hist = [ze]
    guard_per_step = [0]
    for x in grid:
        xv = np.array([x])
        before = stats.activations
        zb = frozen_inner_loop_exact(bp, xv, zb, gamma_b, cfg.T, stats)
        guard_per_step.append(stats.activations - before)
        zb_hist.append(zb)
        if ze is not None:
            ze = euclidean_inner_loop(bp, xv, ze, gamma_e, cfg.T)
        ze_hist.append(ze)

    for j, (x, z) in enumerate(zip(xs, zb_hist)):
        rec = TraceRecord(j, np.array([x]), z, z, schedule.lambda0)
        if j < len(xs) - 1:
            rec.gamma = gamma_b
            rec.alpha = 0.0
            rec.guard_exact = guard_per_step[j + 1]
        trace.records.append(rec)

    b_err = [anchored_error(P, z, c) for z, c in zip(zb_hist, centers)]
    e_err = [anchored_error(P, z, c) for z, c in zip(ze_hist, centers)]
    nan = [float("nan")] * len(xs)
    b_tube = build_tube_report(b_err, nan, cfg.eta, centers)
    e_tube = build_tube_report(e_err, nan, cfg.eta, centers)

    def gaps_and_f(hist):
        gap, fv = [], []
        for x, z, c in zip(xs, hist, centers):
            xv = np.array([x])
            if z is None:
                gap.append(np.nan)
                fv.append(np.nan)
                continue
            gap.append(psi_value(bp, xv, z) - psi_value(bp, xv, c))
            fv.append(inst.f_value(xv, z))
        return np.array(gap), np.array(fv)

    b_gap, b_f = gaps_and_f(zb_hist)
    e_gap, e_f = gaps_and_f(ze_hist)
    c_f = np.array([inst.f_value(np.array([x]), c) for x, c in zip(xs, centers)])
    ez = np.array([np.full(2, np.nan) if z is None else z for z in ze_hist])
    return HexagonResult(cfg, xs, centers, trace, ez, b_tube, e_tube, b_gap, e_gap,
                         b_f, e_f, c_f, g_crit0, gamma_e, stats.activations)
