"""Small quadratic test instances shipped with the package."""

from __future__ import annotations

import numpy as np

from ..polytope import Polytope
from ..problem import AffineMap, quadratic_instance


def unit_interval() -> Polytope:
    return Polytope.box([0.0], [1.0])


def one_d_instance(target_shift: float = 0.0):
    """``f = y^2 / 2``, ``g = (y - x - target_shift)^2 / 2`` on ``[0, 1]``."""
    return quadratic_instance([[1.0]], [0.0], [[1.0]],
                              AffineMap(np.array([[1.0]]), np.array([target_shift])),
                              unit_interval(), name="one-d")


def one_d_target_instance(target: float):
    """``f = y^2 / 2``, ``g = (y - target)^2 / 2`` with no dependence on ``x``."""
    return quadratic_instance([[1.0]], [0.0], [[1.0]],
                              AffineMap(np.zeros((1, 1)), np.array([target])),
                              unit_interval(), name=f"one-d-target-{target}")


# fixed data for the 5-D instance (dim_x = 3)
_Q5 = np.array([
    [2.0, 0.3, 0.0, 0.1, 0.0],
    [0.3, 1.5, 0.2, 0.0, 0.1],
    [0.0, 0.2, 1.2, 0.3, 0.0],
    [0.1, 0.0, 0.3, 1.8, 0.2],
    [0.0, 0.1, 0.0, 0.2, 1.0],
])
_M5 = np.array([
    [0.6, 0.0, 0.2],
    [0.0, 0.5, 0.0],
    [0.3, 0.0, 0.4],
    [0.0, 0.4, 0.3],
    [0.2, 0.2, 0.0],
])
_C0 = np.array([0.3, 0.4, 0.5, 0.6, 0.5])
_CF = np.array([0.9, 0.15, 0.7, 0.95, 0.2])
FIVE_D_X0 = np.array([0.5, -0.5, 0.5])


def five_d_polytope() -> Polytope:
    """The box ``[0, 1]^5`` cut by ``y_1 + y_2 + y_3 <= 2.2``."""
    A = np.vstack([np.eye(5), -np.eye(5), [[1.0, 1.0, 1.0, 0.0, 0.0]]])
    b = np.concatenate([np.ones(5), np.zeros(5), [2.2]])
    return Polytope(A, b, np.full(5, 0.4), np.concatenate([np.ones(10), [2.2]]))


def five_d_instance(x_weight: float = 0.1):
    """Coupled 5-D quadratic with a three-dimensional outer variable."""
    return quadratic_instance(np.eye(5), _CF, _Q5, AffineMap(_M5, _C0), five_d_polytope(),
                              x_weight=x_weight, name="five-d")


def five_d_f_gradient_bound() -> float:
    """Bound on ``||grad_y f||`` over the 5-D polytope, attained at a corner of the unit box."""
    return float(np.linalg.norm(np.maximum(_CF, 1.0 - _CF)))
