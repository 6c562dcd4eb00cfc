"""Grid bridges, the Vervaat transform and fragmentations read off excursions.

Paths live on the uniform grid s = k/N, k = 0..N. The fragmentation at time t
of an excursion e is the list of constancy intervals of the running supremum of
t s - e(s); on the grid those are the gaps between strict-record indices.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from CoalescentLab.model.partition import FragmentationSample, MassPartition

BRIDGE_TOL = 1e-9
DEFAULT_GRID = 2 ** 16


class GridPath:
    """Path values on the grid k/N, k = 0..N."""

    PATH = 'path'
    BRIDGE = 'bridge'
    EXCURSION = 'excursion'

    def __init__(self, values: np.ndarray, kind: str = PATH):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            raise ValueError("a grid path needs N + 1 >= 3 values")
        if kind not in (self.PATH, self.BRIDGE, self.EXCURSION):
            raise ValueError(f"unknown path kind {kind!r}")
        if kind in (self.BRIDGE, self.EXCURSION) and abs(values[-1] - values[0]) > BRIDGE_TOL:
            raise ValueError("bridge endpoint differs from its start")
        if kind == self.EXCURSION:
            if values[0] != 0.0 or values[-1] != 0.0:
                raise ValueError("an excursion starts and ends at 0")
            if values.min() < -BRIDGE_TOL:
                raise ValueError("an excursion is nonnegative")
        self.values = values
        self.values.setflags(write=False)
        self.kind = kind

    @property
    def n_grid(self) -> int:
        return self.values.size - 1

    def times(self) -> np.ndarray:
        return np.arange(self.n_grid + 1) / self.n_grid

    def __len__(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        return f"GridPath(kind={self.kind}, N={self.n_grid})"


@dataclass(frozen=True)
class ThetaSequence:
    """Jump sizes theta_i and Brownian weight sigma of an exchangeable bridge."""

    theta: Tuple[float, ...]
    sigma: float
    literal: bool = False

    def __post_init__(self):
        if any(th < 0 for th in self.theta):
            raise ValueError("theta entries must be nonnegative")
        if any(a < b for a, b in zip(self.theta, self.theta[1:])):
            raise ValueError("theta must be nonincreasing")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        square_sum = math.fsum(th * th for th in self.theta)
        budget = self.sigma + square_sum if self.literal else self.sigma ** 2 + square_sum
        if abs(budget - 1.0) > BRIDGE_TOL:
            relation = "sigma" if self.literal else "sigma^2"
            raise ValueError(f"{relation} + sum(theta^2) must equal 1, got {budget!r}")

    @classmethod
    def brownian(cls) -> 'ThetaSequence':
        return cls((), 1.0)

    @classmethod
    def from_theta(cls, theta: Sequence[float], literal: bool = False) -> 'ThetaSequence':
        """Complete ``theta`` with the sigma that exhausts the variance budget.

        By default sigma^2 = 1 - sum(theta^2); ``literal`` uses sigma = 1 - sum(theta^2).
        """
        ordered = tuple(sorted((float(th) for th in theta), reverse=True))
        rest = 1.0 - math.fsum(th * th for th in ordered)
        if rest < -BRIDGE_TOL:
            raise ValueError("sum(theta^2) exceeds 1")
        rest = max(rest, 0.0)
        return cls(ordered, rest if literal else math.sqrt(rest), literal)

    def tag(self) -> str:
        return 'theta(' + ','.join(repr(th) for th in self.theta) + ')'


def _check_grid(n_grid: int):
    if n_grid < 2:
        raise ValueError(f"grid size must be >= 2, got {n_grid}")


def brownian_bridge(n_grid: int, rng: np.random.Generator) -> GridPath:
    """Standard Brownian bridge with its exact law on the grid."""
    _check_grid(n_grid)
    walk = np.empty(n_grid + 1)
    walk[0] = 0.0
    np.cumsum(rng.normal(0.0, math.sqrt(1.0 / n_grid), n_grid), out=walk[1:])
    s = np.arange(n_grid + 1) / n_grid
    return GridPath(walk - s * walk[-1], GridPath.BRIDGE)


def theta_bridge(theta: ThetaSequence, n_grid: int, rng: np.random.Generator) -> GridPath:
    """sigma b(s) + sum theta_i (1{s >= V_i} - s) on the grid.

    The jump for V_i sits at index ceil(V_i N), keeping 1{s >= V_i} right-continuous.
    """
    _check_grid(n_grid)
    if not isinstance(theta, ThetaSequence):
        raise ValueError("theta_bridge needs a ThetaSequence")
    s = np.arange(n_grid + 1) / n_grid
    if theta.sigma > 0:
        values = theta.sigma * brownian_bridge(n_grid, rng).values
    else:
        values = np.zeros(n_grid + 1)
    if theta.theta:
        positions = rng.random(len(theta.theta))
        cells = np.maximum(np.ceil(positions * n_grid).astype(np.int64), 1)
        k = np.arange(n_grid + 1)
        for size, cell in zip(theta.theta, cells):
            values = values + size * ((k >= cell).astype(float) - s)
    return GridPath(values, GridPath.BRIDGE)


def vervaat(path: GridPath) -> GridPath:
    """Cyclic shift of a bridge to its (first) minimum, lowered to start at 0."""
    values = path.values
    if abs(values[-1] - values[0]) > BRIDGE_TOL:
        raise ValueError("Vervaat transform needs a bridge")
    n_grid = path.n_grid
    cycle = values[:-1]
    low = int(np.argmin(cycle))
    shifted = np.empty(n_grid + 1)
    shifted[:-1] = np.roll(cycle, -low) - cycle[low]
    shifted[-1] = 0.0
    return GridPath(shifted, GridPath.EXCURSION)


def record_indices(excursion: GridPath, t: float) -> np.ndarray:
    """Strict-record indices of t k/N - e(k/N), index 0 included."""
    if not t >= 0:
        raise ValueError(f"fragmentation time must be >= 0, got {t}")
    values = excursion.values
    drift = t * (np.arange(values.size) / excursion.n_grid) - values
    running = np.maximum.accumulate(drift)
    records = np.flatnonzero(drift[1:] > running[:-1]) + 1
    return np.concatenate(([0], records))


def fragmentation_at(excursion: GridPath, t: float) -> MassPartition:
    """Lengths of the constancy intervals of the running supremum at time t."""
    if excursion.kind != GridPath.EXCURSION:
        raise ValueError("fragmentation_at needs an excursion")
    boundaries = np.append(record_indices(excursion, t), excursion.n_grid)
    gaps = np.diff(boundaries)
    gaps = gaps[gaps > 0]
    return MassPartition(gaps / excursion.n_grid)


def sample_brownian_fragmentation(t: float, n_grid: int, rng: np.random.Generator,
                                  seed: Optional[int] = None, replicate: int = 0) -> FragmentationSample:
    """Brownian bridge, Vervaat transform, fragmentation at time t."""
    excursion = vervaat(brownian_bridge(n_grid, rng))
    return FragmentationSample(fragmentation_at(excursion, t), float(t), n_grid, seed,
                               'brownian', replicate)


def sample_theta_fragmentation(theta: ThetaSequence, t: float, n_grid: int, rng: np.random.Generator,
                               seed: Optional[int] = None, replicate: int = 0) -> FragmentationSample:
    """Same pipeline started from an exchangeable-increment bridge."""
    excursion = vervaat(theta_bridge(theta, n_grid, rng))
    law_tag = 'brownian' if not theta.theta else theta.tag()
    return FragmentationSample(fragmentation_at(excursion, t), float(t), n_grid, seed,
                               law_tag, replicate)
