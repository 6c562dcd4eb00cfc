"""Exact simulation of the finite additive coalescent.

Each pair of clusters (m_i, m_j) merges at rate m_i + m_j. The chain is run
through its embedded jump chain: exponential holding times with the total rate
and a pair law proportional to m_i + m_j.
"""
import math
from functools import lru_cache
from typing import Tuple

import numpy as np

from CoalescentLab.model.partition import CoalescentTrajectory, MassPartition

# Up to this many clusters the pair law is sampled from a full table of pairs.
PAIR_TABLE_LIMIT = 1000
# Pair index tables are kept for states with at most this many clusters.
PAIR_CACHE_LIMIT = 256


class AbsorbedStateError(ValueError):
    """Raised when a merge is requested from a state with fewer than two clusters."""


def total_merge_rate(state: MassPartition) -> float:
    """Sum over pairs of (m_i + m_j), which equals (k - 1) * total."""
    if state.k <= 1:
        raise AbsorbedStateError(f"state with {state.k} cluster(s) is absorbed")
    return (state.k - 1) * state.total


def brute_force_merge_rate(state: MassPartition) -> float:
    """Explicit double sum over pairs, for cross-checking."""
    masses = state.masses
    i, j = np.triu_indices(masses.size, k=1)
    return math.fsum((masses[i] + masses[j]).tolist())


@lru_cache(maxsize=PAIR_CACHE_LIMIT)
def _cached_pair_index(k: int) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(k, k=1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def _pair_index(k: int) -> Tuple[np.ndarray, np.ndarray]:
    if k <= PAIR_CACHE_LIMIT:
        return _cached_pair_index(k)
    return np.triu_indices(k, k=1)


def sample_pair(masses: np.ndarray, rng: np.random.Generator) -> Tuple[int, int]:
    """Draw (i, j), i != j, with probability (m_i + m_j) / ((k - 1) * total)."""
    k = masses.size
    if k <= 1:
        raise AbsorbedStateError("no pair to merge")
    if k <= PAIR_TABLE_LIMIT:
        rows, cols = _pair_index(k)
        weights = masses[rows] + masses[cols]
        slot = int(rng.choice(weights.size, p=weights / weights.sum()))
        return int(rows[slot]), int(cols[slot])
    # size-biased first index, uniform partner: P{i,j} = (m_i + m_j) / ((k-1) total)
    first = int(rng.choice(k, p=masses / masses.sum()))
    partner = int(rng.integers(k - 1))
    if partner >= first:
        partner += 1
    return min(first, partner), max(first, partner)


def merge(state: MassPartition, i: int, j: int) -> MassPartition:
    """Replace clusters i and j by one cluster of mass m_i + m_j."""
    masses = state.masses
    keep = np.ones(masses.size, dtype=bool)
    keep[[i, j]] = False
    merged = np.append(masses[keep], masses[i] + masses[j])
    return MassPartition(merged)


def step(state: MassPartition, rng: np.random.Generator) -> Tuple[float, MassPartition]:
    """One transition: exponential holding time, then the merge."""
    rate = total_merge_rate(state)
    holding = float(rng.exponential(1.0 / rate))
    i, j = sample_pair(state.masses, rng)
    return holding, merge(state, i, j)


def simulate(initial: MassPartition, t_end: float, rng: np.random.Generator) -> CoalescentTrajectory:
    """Run from ``initial`` until time ``t_end`` or absorption."""
    if not t_end >= 0:
        raise ValueError(f"t_end must be >= 0, got {t_end}")
    trajectory = CoalescentTrajectory()
    trajectory.append(0.0, initial)
    state, now = initial, 0.0
    while state.k >= 2:
        holding, nxt = step(state, rng)
        if now + holding > t_end:
            break
        now += holding
        trajectory.append(now, nxt)
        state = nxt
    return trajectory


def state_at(initial: MassPartition, duration: float, rng: np.random.Generator) -> MassPartition:
    """State after ``duration`` without keeping the path."""
    if not duration >= 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    state, now = initial, 0.0
    while state.k >= 2:
        holding, nxt = step(state, rng)
        if now + holding > duration:
            break
        now += holding
        state = nxt
    return state


def standard_shifted_state(n: int, t: float, rng: np.random.Generator) -> MassPartition:
    """Monodisperse n-cluster coalescent observed at time t + (1/2) ln n.

    Approximates the standard additive coalescent at time t; the corresponding
    fragmentation time is exp(-t).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    duration = t + 0.5 * math.log(n)
    if duration < 0:
        raise ValueError(f"t={t} is below -ln(n)/2 = {-0.5 * math.log(n)}")
    return state_at(MassPartition.monodisperse(n), duration, rng)
