"""Bilevel instances given by first-order oracles, plus a noisy upper oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInput, NotSPD
from .polytope import Polytope

Oracle = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class BilevelInstance:
    """Upper objective ``f(x, y)`` and lower objective ``g(x, y)`` over a fixed polytope.

    ``g_hess_xy`` returns the ``dim_y x dim_x`` matrix ``d(grad_y g)/dx``.
    Second-order oracles are optional and only used by verification code.
    The ``l_*`` fields are declared bounds on the visited region
    (``l_f0``: gradient bound of f, ``l_g0``: bound on ``grad_x g``,
    ``l_f1``/``l_g1``: smoothness).
    """

    dim_x: int
    dim_y: int
    f_value: Callable
    f_grad_x: Oracle
    f_grad_y: Oracle
    g_value: Callable
    g_grad_x: Oracle
    g_grad_y: Oracle
    rho_g: float
    polytope: Polytope
    g_hess_yy: Optional[Oracle] = None
    g_hess_xy: Optional[Oracle] = None
    f_hess_yy: Optional[Oracle] = None
    l_f0: Optional[float] = None
    l_f1: Optional[float] = None
    l_g0: Optional[float] = None
    l_g1: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if self.rho_g <= 0:
            raise InvalidInput("rho_g must be positive")
        if self.polytope.dim != self.dim_y:
            raise InvalidInput("polytope dimension does not match dim_y")

    @property
    def has_second_order(self) -> bool:
        return self.g_hess_yy is not None and self.g_hess_xy is not None


@dataclass(frozen=True)
class AffineMap:
    """``x -> M x + c0``."""

    M: np.ndarray
    c0: np.ndarray

    def __call__(self, x):
        return self.M @ x + self.c0

    def jacobian(self, x=None):
        return self.M


def quadratic_instance(Q_f, c_f, Q_g, c_g_of_x, polytope: Polytope,
                       x_weight: float = 0.0, name: str = "quadratic") -> BilevelInstance:
    """Quadratic test instance.

    ``f(x, y) = 1/2 (y - c_f)^T Q_f (y - c_f) + x_weight/2 ||x||^2`` and
    ``g(x, y) = 1/2 (y - c(x))^T Q_g (y - c(x))`` where ``c = c_g_of_x`` is
    an :class:`AffineMap` (or any callable with a ``jacobian`` method).
    """
    Q_f = np.atleast_2d(np.asarray(Q_f, dtype=float))
    Q_g = np.atleast_2d(np.asarray(Q_g, dtype=float))
    c_f = np.asarray(c_f, dtype=float).ravel()
    if not np.allclose(Q_g, Q_g.T):
        raise NotSPD("Q_g must be symmetric")
    eig = np.linalg.eigvalsh(Q_g)
    if eig[0] <= 0:
        raise NotSPD(f"Q_g is not positive definite (min eigenvalue {eig[0]:.3e})")
    c = c_g_of_x
    J0 = np.atleast_2d(np.asarray(c.jacobian(), dtype=float))
    dim_y, dim_x = J0.shape

    def f_value(x, y):
        r = y - c_f
        return 0.5 * r @ Q_f @ r + 0.5 * x_weight * (x @ x)

    def f_grad_x(x, y):
        return x_weight * np.asarray(x, dtype=float)

    def f_grad_y(x, y):
        return Q_f @ (y - c_f)

    def g_value(x, y):
        r = y - c(x)
        return 0.5 * r @ Q_g @ r

    def g_grad_y(x, y):
        return Q_g @ (y - c(x))

    def g_grad_x(x, y):
        return -c.jacobian(x).T @ (Q_g @ (y - c(x)))

    def g_hess_yy(x, y):
        return Q_g

    def g_hess_xy(x, y):
        return -Q_g @ c.jacobian(x)

    def f_hess_yy(x, y):
        return Q_f

    return BilevelInstance(
        dim_x=dim_x, dim_y=dim_y,
        f_value=f_value, f_grad_x=f_grad_x, f_grad_y=f_grad_y,
        g_value=g_value, g_grad_x=g_grad_x, g_grad_y=g_grad_y,
        rho_g=float(eig[0]), polytope=polytope,
        g_hess_yy=g_hess_yy, g_hess_xy=g_hess_xy, f_hess_yy=f_hess_yy,
        l_g1=float(eig[-1]),
        l_f1=float(max(np.linalg.eigvalsh(0.5 * (Q_f + Q_f.T))[-1], x_weight)),
        name=name,
    )


def sample_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Uniform sample from the Euclidean ball of the given radius."""
    if radius == 0.0:
        return np.zeros(dim)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    return radius * rng.random() ** (1.0 / dim) * direction


@dataclass(eq=False)
class StochasticUpperOracle:
    """Noisy upper-level gradients: truth plus uniform-on-ball perturbations.

    Uses numpy's PCG64 generator seeded with ``rng_seed``. The lower
    objective oracles are not perturbed. Not safe to share between threads.
    """

    base: BilevelInstance
    noise_radius_x: float
    noise_radius_y: float
    rng_seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.noise_radius_x < 0 or self.noise_radius_y < 0:
            raise InvalidInput("noise radii must be nonnegative")
        self.reset()

    def reset(self):
        self._rng = np.random.Generator(np.random.PCG64(self.rng_seed))

    def f_grad_x(self, x, y):
        g = self.base.f_grad_x(x, y)
        return g + sample_ball(self._rng, g.size, self.noise_radius_x)

    def f_grad_y(self, x, y):
        g = self.base.f_grad_y(x, y)
        return g + sample_ball(self._rng, g.size, self.noise_radius_y)


def sample_noisy_f_grads(oracle: StochasticUpperOracle, x, y):
    return oracle.f_grad_x(x, y), oracle.f_grad_y(x, y)
