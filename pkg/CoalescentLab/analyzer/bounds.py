"""Numeric checks of the small-fragment bound, the ratio limit and the density bound."""
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from CoalescentLab.analyzer.density import DensityEvaluator

DEFAULT_Y_GRID = tuple(np.geomspace(1e-4, 0.5, 20).tolist())
LIMIT_EXPONENTS = (1, 2, 3, 4, 5)


def small_fragment_rows(evaluator: DensityEvaluator, t: float,
                        y_grid: Sequence[float] = DEFAULT_Y_GRID, k: float = 4.0) -> List[Dict]:
    """ratio(y, -t y) against its upper bound exp(t^2 y / 2) on every grid point."""
    rows = []
    for y in sorted(float(v) for v in y_grid):
        estimate = evaluator.ratio_q_over_p(y, -t * y)
        bound = math.exp(t * t * y / 2.0)
        rows.append({
            'y': y,
            'ratio': estimate.value,
            'stderr': estimate.stderr,
            'bound': bound,
            'bound_holds': estimate.value <= bound + k * estimate.stderr,
            'below_one': estimate.value + k * estimate.stderr < 1.0,
        })
    return rows


def small_fragment_threshold(evaluator: DensityEvaluator, t: float,
                             y_grid: Sequence[float] = DEFAULT_Y_GRID, k: float = 4.0) -> Tuple[float, List[Dict]]:
    """Largest grid y such that ratio(y', -t y') < 1 (with k sigma) at every y' <= y.

    Returns 0 when the smallest grid point already fails.
    """
    rows = small_fragment_rows(evaluator, t, y_grid, k)
    y_star = 0.0
    for row in rows:
        if not row['below_one']:
            break
        y_star = row['y']
    return y_star, rows


def ratio_limit_sequence(evaluator: DensityEvaluator, t: float,
                         exponents: Sequence[int] = LIMIT_EXPONENTS) -> List[Dict]:
    """ratio(1 - s, s t) along s = 1 - 10^-k against its limit exp(t c)."""
    target = math.exp(t * evaluator.spec.c)
    rows = []
    for k in exponents:
        gap = 10.0 ** (-k)
        s = 1.0 - gap
        estimate = evaluator.ratio_q_over_p(gap, s * t)
        rows.append({
            'k': int(k),
            's': s,
            'ratio': estimate.value,
            'stderr': estimate.stderr,
            'target': target,
            'abs_error': abs(estimate.value - target),
            'rel_error': abs(estimate.value - target) / target,
        })
    return rows


def density_upper_bound(evaluator: DensityEvaluator, t: float, eps: float,
                        points: int = 64, k: float = 4.0) -> Dict[str, float]:
    """A^(1/eps) exp(t c) p_1(0)/q_1(0) with A the largest ratio(y, -t y) on [eps, 1].

    Fragments below eps contribute factors below one; at most 1/eps fragments
    reach eps. Monte Carlo values enter at their k-sigma upper (or, for the
    normalizer, lower) end.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    grid = np.linspace(eps, 1.0, points)
    peak = 1.0
    for y in grid.tolist():
        estimate = evaluator.ratio_q_over_p(y, -t * y)
        peak = max(peak, estimate.value + k * estimate.stderr)
    normalizer = evaluator.normalizer()
    floor = normalizer.value - k * normalizer.stderr
    if not floor > 0:
        raise ValueError("normalizer estimate is too noisy to bound the density")
    count = math.floor(1.0 / eps)
    bound = peak ** count * math.exp(t * evaluator.spec.c) / floor
    return {'eps': eps, 'A': peak, 'D': math.exp(t * evaluator.spec.c), 'fragments': count,
            'normalizer_floor': floor, 'bound': bound}
