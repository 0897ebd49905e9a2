import re

import numpy as np
import pytest

from barrierbilevel.polytope import Polytope


def random_polytope(rng, d, extra=None):
    """Box [-1, 1]^d intersected with random halfspaces that keep 0 strictly inside."""
    extra = d if extra is None else extra
    G = rng.standard_normal((extra, d))
    A = np.vstack([np.eye(d), -np.eye(d), G])
    b = np.concatenate([np.ones(2 * d), np.abs(G).sum(axis=1) * rng.uniform(0.3, 0.9, extra)])
    return Polytope(A, b, np.zeros(d))


def random_interior_point(rng, P, shrink=0.9):
    """Point on a random ray from the witness, strictly inside."""
    d = rng.standard_normal(P.dim)
    Ad = P.A @ d
    s0 = P.b - P.A @ P.interior_witness
    t_max = np.min(np.where(Ad > 0, s0 / np.where(Ad > 0, Ad, 1.0), np.inf))
    return P.interior_witness + rng.uniform(0.0, shrink) * t_max * d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for status in ("passed", "failed"):
        for rep in terminalreporter.stats.get(status, []):
            if rep.when != "call" or "test_acceptance.py" not in rep.nodeid:
                continue
            m = _CRITERION.search(rep.nodeid)
            if m:
                lines.append((int(m.group(1)), status.upper(), m.group(2).replace("_", " ")))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for num, status, name in sorted(lines):
            terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if status == 'PASSED' else 'FAIL'}  {name}")


def brute_force_certify(schedule, c, K):
    """Scalar per-k re-evaluation of the barrier-aware inequalities.

    Returns ``{condition: first violating k or None}``. Written independently
    of the vectorized checker: plain loops over ``k`` with the sequences
    recomputed from their closed forms.
    """
    s = schedule

    def lam(k):
        if s.kind == "deterministic_polynomial":
            return s.lambda0 * ((k + s.k0) / s.k0) ** (1 / 3)
        if s.kind == "stochastic_polynomial":
            return s.lambda0 * ((k + s.k0) / s.k0) ** (1 / 5)
        return s.lambdas[k]

    def steps(k):
        if s.kind == "deterministic_polynomial":
            return s.alpha0 / (k + s.k0) ** (1 / 3), s.gamma0
        if s.kind == "stochastic_polynomial":
            return s.alpha0 / (k + s.k0) ** (3 / 5), s.gamma0 / (k + s.k0) ** (2 / 5)
        return s.alphas[k], s.gammas[k]

    rho, eta, T, xi = c.rho_psi, s.eta, s.T, s.xi
    lam0 = lam(0)
    first = {"S1": None, "S2": None, "S3": None}
    drift = c.l_f0 / lam0 + 2 * c.l_g0
    s3 = min(
        eta * rho / (16 * c.l_star0 * drift) if drift > 0 else float("inf"),
        eta * rho / (64 * c.l_lambda0 * drift) if drift > 0 else float("inf"),
        c.c_xi * rho / max(c.l_psi1 * c.l_star0 ** 2, c.l_star1 * max(abs(c.l_g0), abs(c.l_f0))),
    )
    for k in range(K):
        a, g = steps(k)
        lk, lk1 = lam(k), lam(k + 1)
        beta, delta = a * lk, lk1 - lk
        s1 = (lam0 >= max(2 * c.l_f1_eta / rho, 8 * c.l_f0_eta / (eta * rho))
              and beta <= g <= min(1 / (4 * c.l_psi1), 1 / (4 * T * rho))
              and (xi * c.L_F == 0 or a <= 1 / (2 * xi * c.L_F)))
        s2 = delta >= 0 and delta / lk <= T * rho * beta / 16
        for name, ok in (("S1", s1), ("S2", s2), ("S3", xi / T <= s3)):
            if not ok and first[name] is None:
                first[name] = k
    return first
