"""Fragmentation generator on multiplicative functionals and the equation for g.

g(t, x) solves

    d/dt g(t, x) + sqrt(x) * integral_0^1 weight(y) (g(t, xy) g(t, x(1-y)) - g(t, x)) dy = 0

with weight the symmetric binary kernel. The residual is measured on a Monte
Carlo surface of g built from one block of coupled subordinator paths, so every
node of the quadrature shares the same randomness.
"""
import bisect
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from CoalescentLab.analyzer.density import g_weights
from CoalescentLab.analyzer.quadrature import (
    DEFAULT_TOL, HALF_ROOT, NU_FIRST_MOMENT, DislocationKernel, QuadratureError, gauss_legendre_panels,
    nu_functional,
)
from CoalescentLab.model.estimate import MCEstimate
from CoalescentLab.model.partition import MassPartition
from CoalescentLab.model.subordinator import (
    COMPOUND_POISSON, GAMMA, ZERO, SubordinatorSpec, levy_mass, sample_gamma_increments,
)
from CoalescentLab.utils.logger import get_logger

BATCHES = 20
FD_DELTA = 1e-3
BOUNDARY_STEP = 1e-3
START_PANELS = 16
MAX_PANELS = 1024
PANEL_ORDER = 10
# nodes per chunk when evaluating compound Poisson paths
NODE_CHUNK = 64


class CoupledSubordinatorPaths:
    """``paths`` independent copies of Gamma on [0, horizon], queried at any time.

    Compound Poisson paths are stored as jump lists. Gamma paths are refined
    lazily: a new time is filled in by a Beta bridge between its known neighbours.
    """

    def __init__(self, spec: SubordinatorSpec, paths: int, rng: np.random.Generator,
                 horizon: float = 1.0):
        if paths < 1:
            raise ValueError(f"paths must be >= 1, got {paths}")
        if not horizon > 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        self.spec = spec
        self.paths = int(paths)
        self.horizon = float(horizon)
        self.rng = rng
        if spec.kind == COMPOUND_POISSON:
            counts = rng.poisson(spec.rate * horizon, self.paths)
            width = max(int(counts.max()), 1)
            filled = np.arange(width)[None, :] < counts[:, None]
            self.jump_times = np.full((self.paths, width), np.inf)
            self.jump_sizes = np.zeros((self.paths, width))
            self.jump_times[filled] = rng.uniform(0.0, horizon, int(filled.sum()))
            self.jump_sizes[filled] = spec.jump.draw(int(filled.sum()), rng)
        elif spec.kind == GAMMA:
            self._times: List[float] = [0.0, self.horizon]
            self._known: Dict[float, np.ndarray] = {
                0.0: np.zeros(self.paths),
                self.horizon: rng.gamma(spec.shape * self.horizon, 1.0 / spec.gamma_rate, self.paths),
            }

    def _check(self, s: float):
        if not 0.0 <= s <= self.horizon:
            raise ValueError(f"time {s} outside [0, {self.horizon}]")

    def value_at(self, s: float) -> np.ndarray:
        """Gamma_s on every path."""
        s = float(s)
        self._check(s)
        if self.spec.kind == ZERO or s == 0.0:
            return np.zeros(self.paths)
        if self.spec.kind == COMPOUND_POISSON:
            return (self.jump_sizes * (self.jump_times <= s)).sum(axis=1)
        known = self._known.get(s)
        if known is not None:
            return known
        slot = bisect.bisect_left(self._times, s)
        left, right = self._times[slot - 1], self._times[slot]
        shape = self.spec.shape
        fraction = self.rng.beta(shape * (s - left), shape * (right - s), self.paths)
        low, high = self._known[left], self._known[right]
        value = low + (high - low) * fraction
        self._times.insert(slot, s)
        self._known[s] = value
        return value

    def values(self, times: np.ndarray) -> np.ndarray:
        """Matrix of Gamma values, one row per path, one column per time."""
        times = np.asarray(times, dtype=float)
        if self.spec.kind == COMPOUND_POISSON:
            if times.size and (times.min() < 0.0 or times.max() > self.horizon):
                raise ValueError(f"times outside [0, {self.horizon}]")
            out = np.empty((self.paths, times.size))
            for start in range(0, times.size, NODE_CHUNK):
                chunk = times[start:start + NODE_CHUNK]
                hit = self.jump_times[:, :, None] <= chunk[None, None, :]
                out[:, start:start + NODE_CHUNK] = (self.jump_sizes[:, :, None] * hit).sum(axis=1)
            return out
        return np.column_stack([self.value_at(s) for s in times.tolist()]) if times.size else \
            np.empty((self.paths, 0))


def _batch_means(samples: np.ndarray, batches: int) -> np.ndarray:
    """Means over ``batches`` contiguous row blocks; rows are paths."""
    return np.stack([block.mean(axis=0) for block in np.array_split(samples, batches, axis=0)])


def dt_g(t: float, x: float, spec: SubordinatorSpec, mc: int, rng: np.random.Generator) -> MCEstimate:
    """exp(-x c^2/2) E[Gamma_x exp(-Gamma_x^2/(2x) + Gamma_x (t + c))]."""
    if not 0.0 < x <= 1.0:
        raise ValueError(f"dt_g needs x in (0, 1], got {x}")
    if spec.kind == ZERO:
        return MCEstimate.exact(0.0, mc)
    gammas = sample_gamma_increments(spec, x, mc, rng)
    scale = math.exp(-x * spec.c * spec.c / 2.0)
    return MCEstimate.from_samples(gammas * g_weights(gammas, t, x, spec.c), scale)


def central_difference_dt_g(t: float, x: float, spec: SubordinatorSpec, mc: int,
                            rng: np.random.Generator, delta: float = FD_DELTA) -> MCEstimate:
    """(g(t + delta, x) - g(t - delta, x)) / (2 delta) on common draws of Gamma_x."""
    if not 0.0 < x <= 1.0:
        raise ValueError(f"x must lie in (0, 1], got {x}")
    if spec.kind == ZERO:
        return MCEstimate.exact(0.0, mc)
    gammas = sample_gamma_increments(spec, x, mc, rng)
    upper = g_weights(gammas, t + delta, x, spec.c)
    lower = g_weights(gammas, t - delta, x, spec.c)
    scale = math.exp(-x * spec.c * spec.c / 2.0) / (2.0 * delta)
    return MCEstimate.from_samples(upper - lower, scale)


def boundary_derivative(spec: SubordinatorSpec) -> float:
    """d/dx g(t, 0) = -c^2/2 - pi(]0, inf[), finite Levy measure only."""
    mass = levy_mass(spec)
    if not math.isfinite(mass):
        raise ValueError("the boundary derivative needs a finite Levy measure")
    return -spec.c * spec.c / 2.0 - mass


def regularity_at_zero(t: float, spec: SubordinatorSpec, mc: int, rng: np.random.Generator,
                       step: float = BOUNDARY_STEP) -> MCEstimate:
    """Forward difference (g(t, step) - 1) / step."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not 0.0 < step <= 1.0:
        raise ValueError(f"step must lie in (0, 1], got {step}")
    scale = math.exp(-step * spec.c * spec.c / 2.0)
    if spec.kind == ZERO:
        return MCEstimate.exact((scale - 1.0) / step, mc)
    gammas = sample_gamma_increments(spec, step, mc, rng)
    return MCEstimate.from_samples((scale * g_weights(gammas, t, step, spec.c) - 1.0) / step)


@dataclass
class PDEResidual:
    """Residual of the equation for g at one (t, x)."""

    t: float
    x: float
    estimate: MCEstimate
    dt: MCEstimate
    integral: MCEstimate
    quad_error: float
    panels: int
    exploratory: bool = False

    def passes(self, k: float = 4.0, tol: float = DEFAULT_TOL) -> bool:
        return abs(self.estimate.value) <= k * self.estimate.stderr + tol + self.quad_error

    def to_dict(self) -> Dict[str, object]:
        return {
            't': self.t,
            'x': self.x,
            'residual': self.estimate.value,
            'stderr': self.estimate.stderr,
            'n': self.estimate.n,
            'dt_g': self.dt.value,
            'kernel_integral': self.integral.value,
            'quad_error': self.quad_error,
            'panels': self.panels,
            'exploratory': self.exploratory,
        }


def _kernel_integral_batches(paths: CoupledSubordinatorPaths, t: float, x: float,
                             g_x: np.ndarray, panels: int, batches: int) -> np.ndarray:
    """Per-batch integral of weight(y) (g(xy) g(x(1-y)) - g(x)) over (0, 1).

    Symmetric in y, so twice the integral over (0, 1/2), taken in v with y = v^2.
    """
    edges = np.linspace(0.0, HALF_ROOT, panels + 1)
    v, weights = gauss_legendre_panels(list(zip(edges[:-1], edges[1:])), PANEL_ORDER)
    y = v * v
    c = paths.spec.c
    jacobian = 2.0 * DislocationKernel.lower_half_density(v)

    def surface(s: np.ndarray) -> np.ndarray:
        gammas = paths.values(s)
        samples = np.exp(-gammas * gammas / (2.0 * s[None, :]) + gammas * (t + c))
        return _batch_means(samples, batches) * np.exp(-s * c * c / 2.0)[None, :]

    total = np.zeros(batches)
    step = 4 * NODE_CHUNK
    for start in range(0, y.size, step):
        part = slice(start, start + step)
        products = surface(x * y[part]) * surface(x * (1.0 - y[part]))
        total += (products - g_x[:, None]) @ (weights[part] * jacobian[part])
    return total


def residual_report(t: float, x: float, spec: SubordinatorSpec, mc: int, tol: float,
                    rng: np.random.Generator, batches: int = BATCHES) -> PDEResidual:
    """Residual of the equation at (t, x) with batch-means error bars.

    The kernel integral is refined by doubling equal panels in v until two
    successive rules differ by less than tol plus a quarter of the integral's
    Monte Carlo error; the last difference is reported as ``quad_error``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not 0.0 < x <= 1.0:
        raise ValueError(f"x must lie in (0, 1], got {x}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if spec.kind == ZERO:
        # g(t, x) = exp(-x c^2/2) solves the equation identically
        zero = MCEstimate.exact(0.0, mc)
        return PDEResidual(t, x, zero, zero, zero, 0.0, 0)
    if mc < 2 * batches:
        raise ValueError(f"mc must be >= {2 * batches}, got {mc}")
    exploratory = spec.kind == GAMMA
    if exploratory:
        get_logger().warning("residual for a gamma subordinator is exploratory: the regularity "
                             "of g at x = 0 is not established for infinite Levy measures")
    paths = CoupledSubordinatorPaths(spec, mc, rng)
    gamma_x = paths.value_at(x)
    weights_x = g_weights(gamma_x, t, x, spec.c)
    scale = math.exp(-x * spec.c * spec.c / 2.0)
    g_x = _batch_means(weights_x[:, None], batches)[:, 0] * scale
    dt_batches = _batch_means((gamma_x * weights_x)[:, None], batches)[:, 0] * scale

    panels = START_PANELS
    previous = _kernel_integral_batches(paths, t, x, g_x, panels, batches)
    while True:
        if panels >= MAX_PANELS:
            raise QuadratureError(f"kernel integral at t={t}, x={x} did not settle "
                                  f"with {MAX_PANELS} panels")
        panels *= 2
        current = _kernel_integral_batches(paths, t, x, g_x, panels, batches)
        quad_error = abs(float(current.mean() - previous.mean()))
        noise = float(current.std(ddof=1)) / math.sqrt(batches)
        if quad_error <= tol + 0.25 * noise:
            break
        previous = current

    residual_batches = dt_batches + math.sqrt(x) * current
    root_b = math.sqrt(batches)
    estimate = MCEstimate(float(residual_batches.mean()), float(residual_batches.std(ddof=1)) / root_b, mc)
    dt = MCEstimate(float(dt_batches.mean()), float(dt_batches.std(ddof=1)) / root_b, mc)
    integral = MCEstimate(float(current.mean()), float(current.std(ddof=1)) / root_b, mc)
    get_logger().debug(f"residual t={t} x={x}: {estimate.value!r} +/- {estimate.stderr!r} "
                       f"({panels} panels, quad error {quad_error!r})")
    return PDEResidual(t, x, estimate, dt, integral, quad_error, panels, exploratory)


def pde_residual(t: float, x: float, spec: SubordinatorSpec, mc: int, tol: float,
                 rng: np.random.Generator) -> MCEstimate:
    """dt_g(t, x) + sqrt(x) * kernel integral, expected to vanish."""
    return residual_report(t, x, spec, mc, tol, rng).estimate


def sup_log_derivative(f: Callable[[float], float], df: Optional[Callable[[float], float]] = None,
                       points: int = 2001) -> float:
    """C_f = sup |f'/f^2| over [0, 1], on a uniform grid.

    Raises ValueError unless f is strictly positive on the grid with f(0) = 1.
    """
    grid = np.linspace(0.0, 1.0, points)
    values = np.array([f(u) for u in grid.tolist()], dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise ValueError("f must be finite and strictly positive on [0, 1]")
    if abs(values[0] - 1.0) > 1e-12:
        raise ValueError(f"f(0) must equal 1, got {values[0]!r}")
    if df is not None:
        slopes = np.array([df(u) for u in grid.tolist()], dtype=float)
    elif np.all(values == values[0]):
        return 0.0
    else:
        slopes = np.gradient(values, grid, edge_order=2)
    return float(np.max(np.abs(slopes) / values ** 2))


def multiplicative_term_bound(c_f: float, r: float) -> float:
    """2 C_f e^C_f r times the integral of (1 - y_1) against nu."""
    return 2.0 * c_f * math.exp(c_f) * r * NU_FIRST_MOMENT


def generator_multiplicative(f: Callable[[float], float], partition: MassPartition, alpha: float,
                             tol: float = DEFAULT_TOL,
                             df: Optional[Callable[[float], float]] = None) -> float:
    """G_alpha of prod f(x_i) at ``partition`` under the binary kernel.

    Fragments are visited from the largest; the sum stops once the bound on the
    remaining fragments falls below ``tol``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    c_f = sup_log_derivative(f, df)
    masses = partition.masses
    if masses.size == 0:
        return 0.0
    product = math.prod(f(x) for x in masses.tolist())
    # remaining[i] = sum over j >= i of x_j^(1 + alpha)
    remaining = np.cumsum((masses ** (1.0 + alpha))[::-1])[::-1]
    total = 0.0
    for i, x in enumerate(masses.tolist()):
        if abs(product) * multiplicative_term_bound(c_f, float(remaining[i])) < tol:
            break
        f_x = f(x)

        def split(y1: float, y2: float, x=x, f_x=f_x) -> float:
            return f(x * y1) * f(x * y2) / f_x - 1.0

        total += x ** alpha * nu_functional(split, tol=tol / 10.0)
    return product * total
