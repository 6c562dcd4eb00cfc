"""Distributional sanity checks tying the simulators to known limits."""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import stats

from CoalescentLab.analyzer.bounds import (
    DEFAULT_Y_GRID, density_upper_bound, ratio_limit_sequence, small_fragment_threshold,
)
from CoalescentLab.analyzer.density import DEFAULT_NORMALIZER_MC, DensityEvaluator
from CoalescentLab.model.subordinator import SubordinatorSpec
from CoalescentLab.operations.measure import importance_expectation, largest_above_half
from CoalescentLab.simulation.coalescent import standard_shifted_state
from CoalescentLab.simulation.excursion import sample_brownian_fragmentation
from CoalescentLab.utils.logger import get_logger
from CoalescentLab.utils.streams import run_replicates, substream, tree_mean

P_VALUE_FLOOR = 1e-3
# The fragment intensity near 0 is t (2 pi)^(-1/2) y^(-3/2) dy, so #{F_i > eps} ~ t sqrt(2/pi) eps^(-1/2)
# and n^2 F_n -> 2 t^2 / pi. The rate t sqrt(2/pi) is reported alongside.
SMALL_FRAGMENT_LIMIT = 2.0 / math.pi
COUNTING_RATE = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class LargestJob:
    source: str
    n: int
    t: float
    grid_n: int
    seed: int
    replicate: int


def largest_job(job: LargestJob) -> float:
    """Largest mass of one coalescent or one fragmentation replicate."""
    rng = substream(job.seed, job.source, job.t, job.replicate)
    if job.source == 'coalescent':
        return standard_shifted_state(job.n, job.t, rng).largest(1)
    return sample_brownian_fragmentation(job.t, job.grid_n, rng).partition.largest(1)


@dataclass(frozen=True)
class TailJob:
    t: float
    grid_n: int
    seed: int
    replicate: int
    low: int
    high: int


def tail_job(job: TailJob) -> Optional[float]:
    """Median over n in [low, high] of n^2 times the n-th largest fragment."""
    rng = substream(job.seed, 'asymptotic', job.t, job.replicate)
    masses = sample_brownian_fragmentation(job.t, job.grid_n, rng).partition.masses
    ranks = np.arange(job.low, min(job.high, masses.size) + 1)
    if ranks.size == 0:
        return None
    return float(np.median(ranks.astype(float) ** 2 * masses[ranks - 1]))


class SanityChecker:
    """Checks of the simulators and densities against exact limits."""

    def __init__(self, seed: int, workers: int = 1):
        self.seed = int(seed)
        self.workers = int(workers)
        self.logger = get_logger()

    def duality_check(self, n: int = 256, t: float = 0.0, grid_n: int = 2 ** 16, replicates: int = 2000,
                      bins: int = 10) -> Dict:
        """Largest mass of the shifted coalescent at t against the fragmentation at exp(-t).

        Two-sample chi-square on bins cut at the pooled quantiles.
        """
        t_frag = math.exp(-t)
        coal_jobs = [LargestJob('coalescent', n, float(t), grid_n, self.seed, r) for r in range(replicates)]
        frag_jobs = [LargestJob('fragmentation', n, t_frag, grid_n, self.seed, r) for r in range(replicates)]
        coalescent = np.array(run_replicates(largest_job, coal_jobs, self.workers))
        fragmentation = np.array(run_replicates(largest_job, frag_jobs, self.workers))
        pooled = np.concatenate([coalescent, fragmentation])
        edges = np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, bins + 1)))
        edges[0], edges[-1] = 0.0, 1.0 + 1e-12
        table = np.vstack([np.histogram(coalescent, edges)[0], np.histogram(fragmentation, edges)[0]])
        table = table[:, table.sum(axis=0) > 0]
        issues = {'critical': [], 'warnings': [], 'info': []}
        if table.shape[1] < bins:
            issues['warnings'].append(f"only {table.shape[1]} distinct bins after merging tied quantiles")
        statistic, p_value, dof, _ = stats.chi2_contingency(table)
        passed = bool(p_value > P_VALUE_FLOOR)
        if not passed:
            issues['critical'].append(f"p-value {p_value:.3g} below {P_VALUE_FLOOR}")
        return {
            'n': n, 't_coalescent': float(t), 't_fragmentation': t_frag, 'grid_n': grid_n,
            'replicates': replicates, 'table': table.tolist(), 'statistic': float(statistic),
            'dof': int(dof), 'p_value': float(p_value),
            'mean_largest_coalescent': float(coalescent.mean()),
            'mean_largest_fragmentation': float(fragmentation.mean()),
            'passed': passed, 'issues': issues,
        }

    def small_fragment_check(self, t: float = 1.0, grid_n: int = 2 ** 18, replicates: int = 200,
                             ranks: Sequence[int] = (50, 200), rel_tol: float = 0.15) -> Dict:
        """Per-path median of n^2 F_n against its limit 2 t^2 / pi over a rank window.

        Passes on the median of the per-path medians. The share of paths within
        ``rel_tol`` is a diagnostic only.
        """
        low, high = int(ranks[0]), int(ranks[1])
        if not 1 <= low <= high:
            raise ValueError(f"invalid rank window {ranks}")
        if not t > 0:
            raise ValueError(f"t must be > 0, got {t}")
        jobs = [TailJob(float(t), grid_n, self.seed, r, low, high) for r in range(replicates)]
        medians = [m for m in run_replicates(tail_job, jobs, self.workers) if m is not None]
        if replicates - len(medians):
            self.logger.warning(f"{replicates - len(medians)} paths had fewer than {low} fragments")
        if len(medians) < 2:
            raise ValueError(f"need two paths with at least {low} fragments, got {len(medians)}")
        target = t * t * SMALL_FRAGMENT_LIMIT
        values = np.array(medians)
        pooled = float(np.median(values))
        sd = float(values.std(ddof=1))
        fraction = float(np.mean(np.abs(values - target) <= rel_tol * target))
        passed = abs(pooled - target) <= rel_tol * target
        self.logger.info(f"small fragments: pooled median {pooled:.4f} against {target:.4f}, "
                         f"{fraction:.0%} of paths within {rel_tol:.0%}")
        return {
            't': float(t), 'grid_n': grid_n, 'replicates': replicates, 'ranks': [low, high],
            'target': target, 'counting_rate': t * COUNTING_RATE,
            'rate_estimates': [math.sqrt(m) for m in medians], 'medians': medians,
            'pooled_median': pooled, 'mean_median': tree_mean(medians), 'sd_median': sd,
            'stderr_median': sd / math.sqrt(values.size), 'fraction_within': fraction,
            'rel_tol': rel_tol, 'passed': passed,
        }

    def limits_check(self, spec: SubordinatorSpec, t: float = 1.0, mc: int = 1_000_000,
                     y_grid: Sequence[float] = DEFAULT_Y_GRID, limit_tol: float = 0.02,
                     small_y: float = 1e-2) -> Dict:
        """Small-fragment ratio bound, ratio limit at s -> 1 and the density bound."""
        evaluator = DensityEvaluator(spec, mc, mc, self.seed)
        y_star, rows = small_fragment_threshold(evaluator, t, y_grid)
        limit_rows = ratio_limit_sequence(evaluator, t)
        issues = {'critical': [], 'warnings': [], 'info': []}
        if not all(row['bound_holds'] for row in rows):
            issues['critical'].append("ratio exceeds exp(t^2 y / 2) on the y grid")
        below = [row for row in rows if row['y'] <= small_y]
        if spec.c > 0 and not all(row['below_one'] for row in below):
            issues['critical'].append(f"ratio is not below 1 for every y <= {small_y}")
        last = limit_rows[-1]
        if last['rel_error'] >= limit_tol:
            issues['critical'].append(f"ratio limit off by {last['rel_error']:.3g} at s = {last['s']}")
        errors = [row['abs_error'] for row in limit_rows]
        if any(b > a + 4.0 * row['stderr'] for a, b, row in zip(errors, errors[1:], limit_rows[1:])):
            issues['warnings'].append("ratio limit error is not monotone in k")
        bound = density_upper_bound(evaluator, t, y_star) if y_star > 0 else None
        if bound is None:
            issues['info'].append("no small-fragment threshold found on the grid; density bound skipped")
        issues['info'].append(f"empirical small-fragment threshold y* = {y_star!r}")
        return {
            't': float(t), 'spec': spec.to_dict(), 'mc': mc, 'y_star': y_star,
            'small_fragment': rows, 'ratio_limit': limit_rows, 'density_bound': bound,
            'passed': not issues['critical'], 'issues': issues,
        }

    def tail_probability_diagnostic(self, spec: SubordinatorSpec, t: float, grid_n: int, replicates: int,
                                    mc: int, normalizer_mc: int = DEFAULT_NORMALIZER_MC) -> Dict:
        """Weighted P(largest > 1/2) against the integral of the weighted marginal."""
        weighted = importance_expectation(largest_above_half, spec, t, grid_n, replicates, mc, self.seed,
                                          self.workers, normalizer_mc)
        exact = DensityEvaluator(spec, mc, normalizer_mc, self.seed).weighted_tail_probability(t, 0.5)
        gap = abs(weighted.estimate.value - exact.value)
        spread = math.hypot(weighted.estimate.stderr, exact.stderr)
        return {
            't': float(t), 'spec': spec.to_dict(), 'importance': weighted.to_dict(),
            'integral': exact.to_dict(), 'gap': gap, 'combined_stderr': spread,
            'within_4_sigma': gap <= 4.0 * spread,
        }
