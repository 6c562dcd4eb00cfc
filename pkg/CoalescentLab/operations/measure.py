"""Size-biased sampling and experiments under the Brownian fragmentation law.

Every replicate draws its path from the stream keyed by (seed, experiment, t,
replicate) and its density factors from the evaluator's keyed streams, so the
results do not depend on how replicates are spread over workers.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy import stats

from CoalescentLab.analyzer.density import DEFAULT_NORMALIZER_MC, DensityEvaluator, brownian_marginal_edges
from CoalescentLab.model.estimate import MCEstimate
from CoalescentLab.model.partition import MassPartition
from CoalescentLab.model.subordinator import SubordinatorSpec, as_spec
from CoalescentLab.simulation.excursion import sample_brownian_fragmentation
from CoalescentLab.utils.logger import get_logger
from CoalescentLab.utils.streams import run_replicates, substream, tree_mean, tree_sum

MIN_MARGINAL_BINS = 20
ESS_WARNING_SHARE = 0.1

Functional = Callable[[MassPartition], float]


def size_biased_rearrange(partition: MassPartition, rng: np.random.Generator) -> List[float]:
    """Masses in size-biased order.

    Exponential race: fragment i rings at an Exp(1)/x_i time and the order of
    the rings is the order of the picks.
    """
    partition.require_normalized()
    masses = partition.masses
    clocks = rng.exponential(1.0, masses.size) / masses
    return masses[np.argsort(clocks, kind='stable')].tolist()


def size_biased_pick(partition: MassPartition, rng: np.random.Generator) -> float:
    """One fragment chosen with probability equal to its mass."""
    partition.require_normalized()
    masses = partition.masses
    return float(masses[rng.choice(masses.size, p=masses / masses.sum())])


def order_probabilities(masses: Sequence[float]) -> Dict[Tuple[int, ...], float]:
    """Probability of every pick order, by enumeration of all permutations."""
    masses = [float(m) for m in masses]
    if len(masses) > 8:
        raise ValueError("enumeration is limited to 8 fragments")
    total = math.fsum(masses)
    result = {}
    for order in itertools.permutations(range(len(masses))):
        prob, left = 1.0, total
        for index in order:
            prob *= masses[index] / left
            left -= masses[index]
        result[order] = prob
    return result


# one evaluator per process and configuration; keyed streams make it identical everywhere
_evaluators: Dict[Tuple[str, int, int, int], DensityEvaluator] = {}


def shared_evaluator(spec: SubordinatorSpec, mc: int, normalizer_mc: int, seed: int) -> DensityEvaluator:
    key = (spec.key(), mc, normalizer_mc, seed)
    evaluator = _evaluators.get(key)
    if evaluator is None:
        evaluator = DensityEvaluator(spec, mc, normalizer_mc, seed)
        _evaluators[key] = evaluator
    return evaluator


@dataclass(frozen=True)
class WeightJob:
    """One replicate of a weighted Brownian experiment."""

    spec: Dict
    t: float
    grid_n: int
    seed: int
    replicate: int
    mc: int
    normalizer_mc: int
    functional: Functional = None


def weight_job(job: WeightJob) -> Tuple[float, float, float]:
    """(f value, density weight, weight stderr) for one Brownian path."""
    rng = substream(job.seed, 'fragmentation', job.t, job.replicate)
    sample = sample_brownian_fragmentation(job.t, job.grid_n, rng, job.seed, job.replicate)
    evaluator = shared_evaluator(as_spec(job.spec), job.mc, job.normalizer_mc, job.seed)
    weight = evaluator.H_product(job.t, sample.partition)
    value = 1.0 if job.functional is None else float(job.functional(sample.partition))
    return value, weight.value, weight.stderr


def _weight_jobs(spec: SubordinatorSpec, t: float, grid_n: int, replicates: int, mc: int,
                 seed: int, normalizer_mc: int, functional: Functional = None) -> List[WeightJob]:
    if replicates < 2:
        raise ValueError(f"replicates must be >= 2, got {replicates}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return [WeightJob(spec.to_dict(), float(t), grid_n, seed, r, mc, normalizer_mc, functional)
            for r in range(replicates)]


def _combined_estimate(samples: np.ndarray, inner: np.ndarray) -> MCEstimate:
    """Outer path spread plus the mean inner density error."""
    n = samples.size
    mean = tree_mean(samples.tolist())
    outer = float(np.var(samples, ddof=1)) / n
    inner_mean = tree_mean(inner.tolist())
    return MCEstimate(mean, math.sqrt(outer + inner_mean ** 2), n)


def martingale_check(spec: SubordinatorSpec, t_list: Sequence[float], grid_n: int, replicates: int,
                     mc: int, seed: int, workers: int = 1,
                     normalizer_mc: int = DEFAULT_NORMALIZER_MC) -> Dict[float, MCEstimate]:
    """Estimate E[h(t, F(t))] under the Brownian law for every t in ``t_list``."""
    logger = get_logger()
    result = {}
    for t in t_list:
        jobs = _weight_jobs(spec, t, grid_n, replicates, mc, seed, normalizer_mc)
        rows = run_replicates(weight_job, jobs, workers)
        weights = np.array([w for _, w, _ in rows])
        inner = np.array([se for _, _, se in rows])
        result[float(t)] = _combined_estimate(weights, inner)
        logger.info(f"martingale t={t}: {result[float(t)].value!r} +/- {result[float(t)].stderr!r}")
    return result


@dataclass
class ImportanceResult:
    """Weighted estimate with weight diagnostics."""

    estimate: MCEstimate
    ess: float
    min_weight: float
    max_weight: float
    replicates: int

    @property
    def ess_share(self) -> float:
        return self.ess / self.replicates

    def to_dict(self) -> Dict[str, float]:
        data = self.estimate.to_dict()
        data.update({'ess': self.ess, 'ess_share': self.ess_share,
                     'min_weight': self.min_weight, 'max_weight': self.max_weight})
        return data


def importance_expectation(f: Functional, spec: SubordinatorSpec, t: float, grid_n: int, replicates: int,
                           mc: int, seed: int, workers: int = 1,
                           normalizer_mc: int = DEFAULT_NORMALIZER_MC) -> ImportanceResult:
    """mean[f(F(t)) h(t, F(t))] over Brownian paths.

    ``f`` must be a module-level callable when ``workers`` > 1.
    """
    jobs = _weight_jobs(spec, t, grid_n, replicates, mc, seed, normalizer_mc, f)
    rows = run_replicates(weight_job, jobs, workers)
    values = np.array([v for v, _, _ in rows])
    weights = np.array([w for _, w, _ in rows])
    inner = np.array([abs(v) * se for v, _, se in rows])
    estimate = _combined_estimate(values * weights, inner)
    weight_sum = tree_sum(weights.tolist())
    square_sum = tree_sum((weights * weights).tolist())
    ess = weight_sum * weight_sum / square_sum if square_sum > 0 else 0.0
    result = ImportanceResult(estimate, ess, float(weights.min()), float(weights.max()), replicates)
    if result.ess_share < ESS_WARNING_SHARE:
        get_logger().warning(f"effective sample size {ess:.1f} is below "
                             f"{ESS_WARNING_SHARE:.0%} of {replicates} replicates")
    return result


def one(partition: MassPartition) -> float:
    return 1.0


def largest_mass(partition: MassPartition) -> float:
    return partition.largest(1)


def second_mass(partition: MassPartition) -> float:
    return partition.largest(2)


def largest_above_half(partition: MassPartition) -> float:
    return 1.0 if partition.largest(1) > 0.5 else 0.0


FUNCTIONALS: Dict[str, Functional] = {
    'one': one,
    'largest': largest_mass,
    'second': second_mass,
    'largest_above_half': largest_above_half,
}


@dataclass(frozen=True)
class PickJob:
    t: float
    grid_n: int
    seed: int
    replicate: int


def pick_job(job: PickJob) -> float:
    """Size-biased fragment of one Brownian fragmentation."""
    rng = substream(job.seed, 'marginal', job.t, job.replicate)
    sample = sample_brownian_fragmentation(job.t, job.grid_n, rng, job.seed, job.replicate)
    return size_biased_pick(sample.partition, rng)


def marginal_density_test(t: float, grid_n: int, replicates: int, seed: int, bins: int = MIN_MARGINAL_BINS,
                          workers: int = 1) -> Dict:
    """Chi-square test of size-biased picks against the closed-form Brownian marginal."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if bins < MIN_MARGINAL_BINS:
        raise ValueError(f"bins must be >= {MIN_MARGINAL_BINS}, got {bins}")
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    if t == 0:
        # F(0) = (1): every pick is the whole mass
        return {'t': 0.0, 'bins': 1, 'edges': [1.0, 1.0], 'observed': [replicates],
                'expected': [float(replicates)], 'bin_probabilities': [1.0],
                'statistic': 0.0, 'p_value': 1.0, 'degenerate': True, 'replicates': replicates}
    jobs = [PickJob(float(t), grid_n, seed, r) for r in range(replicates)]
    picks = np.array(run_replicates(pick_job, jobs, workers))
    edges = brownian_marginal_edges(t, bins)
    observed, _ = np.histogram(picks, bins=edges)
    probabilities = np.full(bins, 1.0 / bins)
    expected = probabilities * replicates
    statistic, p_value = stats.chisquare(observed, expected)
    return {
        't': float(t),
        'bins': bins,
        'edges': edges.tolist(),
        'observed': observed.tolist(),
        'expected': expected.tolist(),
        'bin_probabilities': probabilities.tolist(),
        'statistic': float(statistic),
        'p_value': float(p_value),
        'degenerate': False,
        'replicates': replicates,
        'mean_pick': tree_mean(picks.tolist()),
    }
