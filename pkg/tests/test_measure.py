"""Tests for size-biased sampling and the weighted Brownian experiments."""
import math

import numpy as np
import pytest

from conftest import K_SIGMA
from CoalescentLab.model.partition import MassPartition
from CoalescentLab.model.subordinator import JumpLaw, SubordinatorSpec
from CoalescentLab.operations.measure import (
    FUNCTIONALS, importance_expectation, largest_mass, marginal_density_test, martingale_check,
    order_probabilities, shared_evaluator, size_biased_pick, size_biased_rearrange,
)
from CoalescentLab.simulation.excursion import sample_brownian_fragmentation
from CoalescentLab.utils.streams import substream

MASSES = (0.7, 0.2, 0.1)


def test_rearrange_single_fragment(rng):
    assert size_biased_rearrange(MassPartition([1.0]), rng) == [1.0]


def test_rearrange_rejects_unnormalized(rng):
    with pytest.raises(ValueError):
        size_biased_rearrange(MassPartition([0.5, 0.2]), rng)
    with pytest.raises(ValueError):
        size_biased_pick(MassPartition([0.5, 0.2]), rng)


def test_order_probabilities_by_enumeration():
    probabilities = order_probabilities(MASSES)
    assert len(probabilities) == 6
    assert sum(probabilities.values()) == pytest.approx(1.0)
    assert probabilities[(0, 1, 2)] == pytest.approx(0.7 * 0.2 / 0.3)
    with pytest.raises(ValueError):
        order_probabilities([0.1] * 9)


def _assert_order_law(rng, draws):
    partition = MassPartition(MASSES)
    index = {mass: i for i, mass in enumerate(MASSES)}
    counts = {}
    for _ in range(draws):
        order = tuple(index[m] for m in size_biased_rearrange(partition, rng))
        counts[order] = counts.get(order, 0) + 1
    for order, p in order_probabilities(MASSES).items():
        observed = counts.get(order, 0) / draws
        assert abs(observed - p) <= K_SIGMA * math.sqrt(p * (1.0 - p) / draws)


def test_rearrange_matches_enumeration(rng):
    _assert_order_law(rng, 50_000)


@pytest.mark.slow
def test_rearrange_matches_enumeration_acceptance(rng):
    _assert_order_law(rng, 1_000_000)


def test_size_biased_pick_frequencies(rng):
    partition = MassPartition(MASSES)
    draws = 50_000
    picks = np.array([size_biased_pick(partition, rng) for _ in range(draws)])
    for mass in MASSES:
        observed = np.mean(picks == mass)
        assert abs(observed - mass) <= K_SIGMA * math.sqrt(mass * (1.0 - mass) / draws)


def test_shared_evaluator_is_reused(poisson_spec):
    assert shared_evaluator(poisson_spec, 1000, 1000, 1) is shared_evaluator(poisson_spec, 1000, 1000, 1)
    assert shared_evaluator(poisson_spec, 1000, 1000, 1) is not shared_evaluator(poisson_spec, 1000, 1000, 2)


def test_martingale_is_exactly_one_for_zero_spec(zero_spec):
    result = martingale_check(zero_spec, [0.5, 1.0], 2 ** 10, 20, 1000, seed=4, normalizer_mc=1000)
    for estimate in result.values():
        assert estimate.value == 1.0
        assert estimate.stderr == 0.0


def test_martingale_unit_expectation(poisson_spec):
    result = martingale_check(poisson_spec, [0.5, 1.0], 2 ** 10, 300, 2000, seed=4, normalizer_mc=200_000)
    for estimate in result.values():
        assert estimate.within(1.0, K_SIGMA)
    a, b = result[0.5], result[1.0]
    assert abs(a.value - b.value) <= K_SIGMA * math.hypot(a.stderr, b.stderr)


@pytest.mark.slow
def test_martingale_unit_expectation_acceptance(poisson_spec):
    result = martingale_check(poisson_spec, [0.5, 1.0], 2 ** 14, 2000, 10_000, seed=4)
    for estimate in result.values():
        assert estimate.within(1.0, K_SIGMA)
    a, b = result[0.5], result[1.0]
    assert abs(a.value - b.value) <= K_SIGMA * math.hypot(a.stderr, b.stderr)


def test_martingale_needs_two_replicates(poisson_spec):
    with pytest.raises(ValueError):
        martingale_check(poisson_spec, [1.0], 2 ** 8, 1, 1000, seed=4, normalizer_mc=1000)


def test_importance_with_zero_spec_is_plain_average(zero_spec):
    t, grid_n, replicates = 1.0, 2 ** 10, 30
    result = importance_expectation(largest_mass, zero_spec, t, grid_n, replicates, 1000, seed=6,
                                    normalizer_mc=1000)
    plain = [sample_brownian_fragmentation(t, grid_n, substream(6, 'fragmentation', t, r)).partition.largest(1)
             for r in range(replicates)]
    assert result.estimate.value == pytest.approx(float(np.mean(plain)), rel=1e-12)
    assert result.ess == pytest.approx(replicates)
    assert result.min_weight == result.max_weight == 1.0


def test_importance_diagnostics(poisson_spec):
    result = importance_expectation(FUNCTIONALS['one'], poisson_spec, 1.0, 2 ** 10, 50, 1000, seed=6,
                                    normalizer_mc=100_000)
    assert 0.0 < result.ess <= 50.0 + 1e-9
    assert result.min_weight <= result.max_weight
    data = result.to_dict()
    assert set(data) >= {'value', 'stderr', 'ess', 'ess_share', 'min_weight', 'max_weight'}


@pytest.fixture(scope='module')
def weighted_functionals():
    spec = SubordinatorSpec.compound_poisson(1.0, JumpLaw.constant(1.0), 1.0)
    return {name: importance_expectation(f, spec, 0.5, 2 ** 10, 200, 1000, seed=8, normalizer_mc=200_000)
            for name, f in FUNCTIONALS.items()}


@pytest.mark.parametrize('name', sorted(FUNCTIONALS))
def test_weighted_functionals_stay_in_range(weighted_functionals, name):
    estimate = weighted_functionals[name].estimate
    assert -K_SIGMA * estimate.stderr <= estimate.value <= 1.0 + K_SIGMA * estimate.stderr
    assert weighted_functionals[name].ess == pytest.approx(weighted_functionals['one'].ess)


def test_weighted_functionals_share_paths(weighted_functionals):
    value = {name: result.estimate.value for name, result in weighted_functionals.items()}
    assert value['second'] <= value['largest'] <= value['one']
    assert value['largest_above_half'] <= value['one']
    assert abs(value['one'] - 1.0) <= K_SIGMA * weighted_functionals['one'].estimate.stderr + 0.02


def test_largest_above_half_is_an_indicator():
    indicator = FUNCTIONALS['largest_above_half']
    assert indicator(MassPartition([0.6, 0.4])) == 1.0
    assert indicator(MassPartition([0.5, 0.5])) == 0.0
    assert FUNCTIONALS['second'](MassPartition([0.6, 0.4])) == 0.4


def test_marginal_at_time_zero_is_degenerate():
    report = marginal_density_test(0.0, 2 ** 10, 50, seed=1)
    assert report['degenerate']
    assert report['p_value'] == 1.0


def test_marginal_bins_floor():
    with pytest.raises(ValueError):
        marginal_density_test(1.0, 2 ** 10, 50, seed=1, bins=10)


@pytest.mark.parametrize('t', [0.5, 1.0])
def test_marginal_matches_closed_form(t):
    report = marginal_density_test(t, 2 ** 12, 2000, seed=2)
    assert report['p_value'] > 1e-3
    assert sum(report['observed']) == 2000
    assert sum(report['bin_probabilities']) == pytest.approx(1.0)


@pytest.mark.slow
def test_marginal_matches_closed_form_acceptance():
    report = marginal_density_test(1.0, 2 ** 16, 10_000, seed=2)
    assert report['p_value'] > 1e-3
