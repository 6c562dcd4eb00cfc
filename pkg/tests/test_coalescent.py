"""Tests for the finite additive coalescent simulator."""
import math

import numpy as np
import pytest

from conftest import K_SIGMA
from CoalescentLab.model.partition import MassPartition
from CoalescentLab.simulation import coalescent
from CoalescentLab.simulation.coalescent import (
    AbsorbedStateError, brute_force_merge_rate, merge, sample_pair, simulate, standard_shifted_state,
    state_at, step, total_merge_rate,
)

THREE_CLUSTERS = MassPartition([0.5, 0.3, 0.2])
PAIR_LAW = {(0, 1): 0.4, (0, 2): 0.35, (1, 2): 0.25}


def test_total_rate_examples():
    assert total_merge_rate(MassPartition([0.5, 0.5])) == 1.0
    assert total_merge_rate(THREE_CLUSTERS) == pytest.approx(2.0)
    assert total_merge_rate(MassPartition.monodisperse(10)) == pytest.approx(9.0)


def test_total_rate_matches_double_sum(rng):
    for _ in range(1000):
        k = int(rng.integers(2, 40))
        state = MassPartition(rng.dirichlet(np.ones(k)))
        assert total_merge_rate(state) == pytest.approx(brute_force_merge_rate(state), abs=1e-10)


def test_single_cluster_is_absorbed(rng):
    with pytest.raises(AbsorbedStateError):
        total_merge_rate(MassPartition([1.0]))
    with pytest.raises(AbsorbedStateError):
        sample_pair(np.array([1.0]), rng)


def test_two_clusters_merge_into_one(rng):
    holding, nxt = step(MassPartition([0.5, 0.5]), rng)
    assert holding > 0.0
    assert nxt.to_list() == [1.0]


def test_merge_conserves_mass():
    merged = merge(THREE_CLUSTERS, 1, 2)
    assert merged.to_list() == [0.5, 0.5]


def _pair_frequencies(rng, draws):
    counts = {pair: 0 for pair in PAIR_LAW}
    for _ in range(draws):
        counts[sample_pair(THREE_CLUSTERS.masses, rng)] += 1
    return counts


def _assert_pair_law(counts, draws):
    for pair, p in PAIR_LAW.items():
        observed = counts[pair] / draws
        assert abs(observed - p) <= K_SIGMA * math.sqrt(p * (1.0 - p) / draws)


def test_pair_law_from_table(rng):
    draws = 50_000
    _assert_pair_law(_pair_frequencies(rng, draws), draws)


def test_pair_law_without_table(rng, monkeypatch):
    monkeypatch.setattr(coalescent, 'PAIR_TABLE_LIMIT', 1)
    draws = 50_000
    _assert_pair_law(_pair_frequencies(rng, draws), draws)


@pytest.mark.slow
def test_pair_law_from_table_acceptance(rng):
    draws = 1_000_000
    _assert_pair_law(_pair_frequencies(rng, draws), draws)


def test_mean_holding_time(rng):
    state = MassPartition([0.5, 0.5])
    holdings = np.array([step(state, rng)[0] for _ in range(20_000)])
    assert abs(holdings.mean() - 1.0) <= K_SIGMA * holdings.std(ddof=1) / math.sqrt(holdings.size)


def test_simulate_zero_horizon_and_absorbed_start(rng):
    trajectory = simulate(MassPartition([1.0]), 5.0, rng)
    assert trajectory.events == 0
    trajectory = simulate(MassPartition.monodisperse(4), 0.0, rng)
    assert trajectory.events == 0
    with pytest.raises(ValueError):
        simulate(MassPartition([1.0]), -1.0, rng)


def test_simulate_to_absorption(rng):
    trajectory = simulate(MassPartition.monodisperse(100), math.inf, rng)
    assert trajectory.events == 99
    assert trajectory.final_state.to_list() == [pytest.approx(1.0)]
    assert all(b > a for a, b in zip(trajectory.times, trajectory.times[1:]))
    for _, state in trajectory:
        assert state.total == pytest.approx(1.0, abs=1e-12)


def test_state_at_agrees_with_simulate(rng):
    seed = np.random.SeedSequence(99)
    a = np.random.Generator(np.random.Philox(seed))
    b = np.random.Generator(np.random.Philox(seed))
    initial = MassPartition.monodisperse(30)
    assert state_at(initial, 1.5, a) == simulate(initial, 1.5, b).final_state


def test_standard_shifted_state(rng):
    assert standard_shifted_state(1, 0.0, rng).to_list() == [1.0]
    state = standard_shifted_state(64, 0.0, rng)
    assert 1 <= state.k <= 64
    assert state.total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        standard_shifted_state(64, -5.0, rng)
    with pytest.raises(ValueError):
        standard_shifted_state(0, 0.0, rng)
