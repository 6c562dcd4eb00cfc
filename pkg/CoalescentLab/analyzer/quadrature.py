"""Quadrature against the binary dislocation measure.

nu(x_1 in dy) = (2 pi y^3 (1-y)^3)^(-1/2) dy on ]1/2, 1[, nu(x_3 > 0) = 0. Both
endpoint singularities are power laws; the substitutions 1 - y = w^2 and y = v^2
remove them before adaptive Gauss-Kronrod integration.
"""
import math
import warnings
from typing import Callable, List, Tuple

import numpy as np
from scipy import integrate

DEFAULT_TOL = 1e-4
HALF_ROOT = math.sqrt(0.5)
# closed form of the integral of (1 - y_1) against nu
NU_FIRST_MOMENT = math.sqrt(2.0 / math.pi)


class QuadratureError(ValueError):
    """Raised when an integral does not converge or is not finite."""


def adaptive_quad(fn: Callable[[float], float], a: float, b: float, tol: float,
                  limit: int = 200, full_output: bool = False):
    """scipy ``quad`` with convergence warnings turned into QuadratureError.

    Returns (value, abserr), plus the sorted subinterval panels when
    ``full_output`` is set.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            result = integrate.quad(fn, a, b, epsabs=tol, epsrel=0.0, limit=limit, full_output=1)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    value, abserr, info = result[0], result[1], result[2]
    if len(result) > 3:
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {result[3]}")
    if not (math.isfinite(value) and math.isfinite(abserr)):
        raise QuadratureError(f"quadrature on [{a}, {b}] is not finite")
    if not full_output:
        return value, abserr
    last = int(info['last'])
    panels = sorted(zip(info['alist'][:last].tolist(), info['blist'][:last].tolist()))
    return value, abserr, panels


def gauss_legendre_panels(panels: List[Tuple[float, float]], order: int = 15) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``order``-point Gauss-Legendre rule on every panel."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in panels:
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        nodes.append(mid + half * xg)
        weights.append(half * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def nu_density(y: float) -> float:
    """Density of nu(x_1 in dy) on ]1/2, 1[."""
    if not 0.5 < y < 1.0:
        raise ValueError(f"nu density lives on ]1/2, 1[, got {y}")
    return 1.0 / math.sqrt(2.0 * math.pi * y ** 3 * (1.0 - y) ** 3)


def nu_functional(phi: Callable[[float, float], float], tol: float = DEFAULT_TOL) -> float:
    """Integral of phi(y, 1 - y) against nu, phi being O(1 - y) as y -> 1.

    With 1 - y = w^2 the integrand is 2 phi / (sqrt(2 pi) (1 - w^2)^(3/2) w^2)
    on (0, 1/sqrt(2)), bounded at w = 0 under the decay condition.
    """
    norm = 2.0 / math.sqrt(2.0 * math.pi)

    def integrand(w: float) -> float:
        w2 = w * w
        return norm * phi(1.0 - w2, w2) / ((1.0 - w2) ** 1.5 * w2)

    value, _ = adaptive_quad(integrand, 0.0, HALF_ROOT, tol)
    return value


class DislocationKernel:
    """Symmetric binary kernel weight(y) = (8 pi y^3 (1-y)^3)^(-1/2) on (0, 1).

    It carries the same mass as nu, spread evenly over both halves.
    """

    @staticmethod
    def weight(y):
        y = np.asarray(y, dtype=float)
        if np.any((y <= 0.0) | (y >= 1.0)):
            raise ValueError(f"kernel weight lives on (0, 1), got {y}")
        return 1.0 / np.sqrt(8.0 * math.pi * y ** 3 * (1.0 - y) ** 3)

    @classmethod
    def lower_half_density(cls, v):
        """Weight in v with y = v^2, so that dy weight(y) = dv 2 v weight(v^2) on (0, 1/sqrt(2))."""
        v = np.asarray(v, dtype=float)
        return 2.0 * v * cls.weight(v * v)
