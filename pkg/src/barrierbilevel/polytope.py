"""Polyhedral feasible sets, the logarithmic barrier and anchored Dikin metrics.

A polytope is stored in halfspace form ``{y : A y <= b}``. The barrier is

    phi(y) = -sum_i log(b_i - a_i^T y)

with gradient ``A^T s^{-1}`` and Hessian ``A^T Diag(s^{-2}) A`` where
``s = b - A y`` are the slacks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    FactorizationFailure,
    InvalidInput,
    MissingBounds,
    NonInterior,
)

DENSE_THRESHOLD = 512
SOLVE_TOL = 1e-10
RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Polytope:
    """The set ``{y : A y <= b}`` together with a strictly feasible point.

    ``slack_upper_bounds`` (optional) must dominate ``max_{y in Y} b_i - a_i^T y``
    for every row; it is only used by :func:`euclidean_dikin_kappa`.
    """

    A: np.ndarray
    b: np.ndarray
    interior_witness: np.ndarray
    slack_upper_bounds: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        w = np.asarray(self.interior_witness, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise InvalidInput(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if w.size != A.shape[1]:
            raise InvalidInput(f"witness has dimension {w.size}, expected {A.shape[1]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "interior_witness", w)
        if self.slack_upper_bounds is not None:
            sbar = np.asarray(self.slack_upper_bounds, dtype=float).ravel()
            if sbar.size != b.size or np.any(sbar <= 0):
                raise InvalidInput("slack_upper_bounds must be positive with one entry per row")
            object.__setattr__(self, "slack_upper_bounds", sbar)
        for arr in (self.A, self.b, self.interior_witness):
            arr.setflags(write=False)

        if not np.all(b - A @ w > 0):
            raise NonInterior("interior_witness is not strictly feasible")
        # column-pivoted QR; a compact polytope needs full column rank
        _, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = RANK_TOL * max(np.linalg.norm(A), 1e-300)
        if diag.size < A.shape[1] or np.any(diag <= tol):
            raise InvalidInput("constraint matrix A must have full column rank")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @classmethod
    def box(cls, lower, upper) -> "Polytope":
        """Axis-aligned box ``lower <= y <= upper`` with exact slack bounds."""
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise InvalidInput("box requires lower < upper componentwise")
        d = lower.size
        A = np.vstack([np.eye(d), -np.eye(d)])
        b = np.concatenate([upper, -lower])
        width = upper - lower
        return cls(A, b, 0.5 * (lower + upper), np.concatenate([width, width]))

    @classmethod
    def from_dict(cls, doc: dict) -> "Polytope":
        if "box" in doc:
            return cls.box(doc["box"]["lower"], doc["box"]["upper"])
        try:
            return cls(
                doc["A"],
                doc["b"],
                doc["interior_witness"],
                doc.get("slack_upper_bounds"),
            )
        except KeyError as exc:
            raise InvalidInput(f"polytope document is missing {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "Polytope":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        doc = {
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "interior_witness": self.interior_witness.tolist(),
        }
        if self.slack_upper_bounds is not None:
            doc["slack_upper_bounds"] = self.slack_upper_bounds.tolist()
        return doc


def _check_dim(P: Polytope, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (P.dim,):
        raise InvalidInput(f"expected a vector of dimension {P.dim}, got shape {y.shape}")
    return y


def slacks(P: Polytope, y) -> np.ndarray:
    y = _check_dim(P, y)
    return P.b - P.A @ y


def is_strict_interior(P: Polytope, y, margin: float = 0.0) -> bool:
    return bool(np.all(slacks(P, y) > margin))


def interior_slacks(P: Polytope, y) -> np.ndarray:
    """Slacks at ``y``, raising :class:`NonInterior` if any is nonpositive."""
    s = slacks(P, y)
    if not np.all(s > 0):
        raise NonInterior(f"point is not strictly interior (min slack {s.min():.3e})")
    return s


def barrier_value(P: Polytope, y) -> float:
    return float(-np.sum(np.log(interior_slacks(P, y))))


def barrier_gradient(P: Polytope, y) -> np.ndarray:
    return P.A.T @ (1.0 / interior_slacks(P, y))


def barrier_hessian_apply(P: Polytope, y, v) -> np.ndarray:
    s = interior_slacks(P, y)
    return P.A.T @ ((P.A @ np.asarray(v, dtype=float)) / s**2)


def barrier_hessian(P: Polytope, y) -> np.ndarray:
    """Dense ``A^T Diag(s^{-2}) A``."""
    s = interior_slacks(P, y)
    As = P.A / s[:, None]
    return As.T @ As


def max_step_to_boundary(P: Polytope, y, direction, fraction: float) -> float:
    """Largest ``t`` in (0, 1] keeping every new slack >= (1 - fraction) * old slack."""
    s = slacks(P, y)
    Ad = P.A @ direction
    mask = Ad > 0
    if not np.any(mask):
        return 1.0
    return float(min(1.0, fraction * np.min(s[mask] / Ad[mask])))


def pcg(matvec, w, diag, tol=SOLVE_TOL, max_iter=None):
    """Jacobi-preconditioned conjugate gradients for an SPD operator.

    Returns ``(v, iterations)``; raises :class:`ConvergenceFailure` when the
    relative residual stays above ``tol`` after ``max_iter`` iterations.
    """
    w = np.asarray(w, dtype=float)
    wnorm = np.linalg.norm(w)
    v = np.zeros_like(w)
    if wnorm == 0.0:
        return v, 0
    if max_iter is None:
        max_iter = 10 * w.size
    r = w.copy()
    z = r / diag
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Hp = matvec(p)
        step = rz / (p @ Hp)
        v += step * p
        r -= step * Hp
        res = np.linalg.norm(r)
        if res <= tol * wnorm:
            return v, it
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceFailure(
        f"PCG stopped at relative residual {res / wnorm:.3e} after {max_iter} iterations",
        residual=res / wnorm,
        iterations=max_iter,
    )


@dataclass(frozen=True, eq=False)
class DikinAnchor:
    """Barrier Hessian ``H_c`` frozen at an interior center ``c``.

    Small problems keep the triangular factor ``R`` of ``S^{-1} A = Q R``
    (so ``H_c = R^T R`` without squaring the condition number); larger ones
    solve with PCG using two matrix-vector products with ``A`` per iteration.
    """

    center: np.ndarray
    polytope: Polytope
    _slacks: np.ndarray = field(repr=False)
    _R: Optional[np.ndarray] = field(default=None, repr=False)
    solve_tol: float = SOLVE_TOL

    @property
    def dense(self) -> bool:
        return self._R is not None

    def apply(self, v) -> np.ndarray:
        A = self.polytope.A
        return A.T @ ((A @ np.asarray(v, dtype=float)) / self._slacks**2)

    def solve(self, w) -> np.ndarray:
        return anchor_solve(self, w)

    def matrix(self) -> np.ndarray:
        As = self.polytope.A / self._slacks[:, None]
        return As.T @ As


def make_anchor(P: Polytope, c, dense_threshold: int = DENSE_THRESHOLD,
                solve_tol: float = SOLVE_TOL) -> DikinAnchor:
    c = _check_dim(P, c).copy()
    s = interior_slacks(P, c)
    R = None
    if P.dim <= dense_threshold:
        R = scipy.linalg.qr(P.A / s[:, None], mode="r", check_finite=False)[0][: P.dim]
        diag = np.abs(np.diag(R))
        if not np.all(np.isfinite(R)) or diag.min() <= 1e-15 * diag.max():
            raise FactorizationFailure("barrier Hessian is numerically singular at this point")
    c.setflags(write=False)
    return DikinAnchor(c, P, s, R, solve_tol)


def anchor_solve(anchor: DikinAnchor, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if anchor.dense:
        t = scipy.linalg.solve_triangular(anchor._R, w, trans="T", check_finite=False)
        return scipy.linalg.solve_triangular(anchor._R, t, check_finite=False)
    A = anchor.polytope.A
    diag = np.sum(A**2 / anchor._slacks[:, None] ** 2, axis=0)
    v, _ = pcg(anchor.apply, w, diag, tol=anchor.solve_tol)
    return v


def dikin_norm(anchor: DikinAnchor, u) -> float:
    u = np.asarray(u, dtype=float)
    Au = (anchor.polytope.A @ u) / anchor._slacks
    return float(np.sqrt(Au @ Au))


def dikin_dual_norm(anchor: DikinAnchor, w) -> float:
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        return 0.0
    if anchor.dense:
        t = scipy.linalg.solve_triangular(anchor._R, w, trans="T", check_finite=False)
        return float(np.linalg.norm(t))
    return float(np.sqrt(max(w @ anchor_solve(anchor, w), 0.0)))


class MetricBounds(NamedTuple):
    r: float
    lower: float
    upper: float
    valid: bool


def metric_comparison_bounds(P: Polytope, y1, y2) -> MetricBounds:
    """Spectral sandwich of ``H(y2)`` against ``H(y1)`` from ``r = ||y1 - y2||_{y1}``.

    For ``r < 1``: ``(1-r)^2 H(y1) <= H(y2) <= (1-r)^{-2} H(y1)``.
    """
    s1 = interior_slacks(P, y1)
    interior_slacks(P, y2)
    h = P.A @ (np.asarray(y1, dtype=float) - np.asarray(y2, dtype=float)) / s1
    r = float(np.sqrt(h @ h))
    if r >= 1.0:
        return MetricBounds(r, 0.0, np.inf, False)
    return MetricBounds(r, (1.0 - r) ** 2, (1.0 - r) ** -2, True)


def euclidean_dikin_kappa(P: Polytope) -> float:
    """Factor ``kappa >= 1`` with ``||u||_2 <= kappa ||u||_y`` for every interior ``y``."""
    if P.slack_upper_bounds is None:
        raise MissingBounds("euclidean_dikin_kappa needs slack_upper_bounds on the polytope")
    As = P.A / P.slack_upper_bounds[:, None]
    rho = float(np.linalg.eigvalsh(As.T @ As)[0])
    return max(1.0, rho**-0.5)


def analytic_center(P: Polytope, tol: float = 1e-10, max_iter: int = 200,
                    y0=None) -> np.ndarray:
    """Minimizer of the barrier by damped Newton from the interior witness."""
    y = P.interior_witness.copy() if y0 is None else _check_dim(P, y0).copy()
    for _ in range(max_iter):
        s = interior_slacks(P, y)
        grad = P.A.T @ (1.0 / s)
        As = P.A / s[:, None]
        H = As.T @ As
        step = -np.linalg.solve(H, grad)
        decrement = float(np.sqrt(max(-grad @ step, 0.0)))
        if decrement <= tol:
            return y
        t = 1.0 / (1.0 + decrement) if decrement > 0.25 else 1.0
        t = min(t, max_step_to_boundary(P, y, step, 0.99))
        y = y + t * step
    raise ConvergenceFailure("analytic_center did not converge", residual=decrement,
                             iterations=max_iter)
