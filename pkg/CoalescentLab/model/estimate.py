"""Monte Carlo estimate value type and error propagation helpers."""
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class MCEstimate:
    """A Monte Carlo value with its standard error and sample count."""

    value: float
    stderr: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n}")
        if not self.stderr >= 0.0:
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")

    @classmethod
    def from_samples(cls, samples: np.ndarray, scale: float = 1.0) -> 'MCEstimate':
        """Mean of i.i.d. samples times a deterministic factor."""
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n == 0:
            raise ValueError("no samples")
        mean = float(np.mean(samples))
        sd = float(np.std(samples, ddof=1)) if n > 1 else 0.0
        return cls(scale * mean, abs(scale) * sd / math.sqrt(n), n)

    @classmethod
    def exact(cls, value: float, n: int = 1) -> 'MCEstimate':
        """A deterministic value carried in estimate form."""
        return cls(float(value), 0.0, n)

    def within(self, target: float, k: float = 4.0, slack: float = 0.0) -> bool:
        """True when ``target`` lies within k standard errors (plus slack)."""
        return abs(self.value - target) <= k * self.stderr + slack

    def relative_error(self) -> float:
        if self.value == 0.0:
            return 0.0 if self.stderr == 0.0 else math.inf
        return self.stderr / abs(self.value)

    def to_dict(self) -> Dict[str, float]:
        return {'value': self.value, 'stderr': self.stderr, 'n': self.n}


def product_estimate(factors: Sequence[MCEstimate], powers: Iterable[float] = None,
                     scale: float = 1.0) -> MCEstimate:
    """Product ``scale * prod(f_i ** p_i)`` of independent estimates.

    Accumulates in log space; the standard error follows the first-order delta
    method, sqrt(sum((p_i * se_i / f_i)^2)) relative error.
    """
    if powers is None:
        powers = [1.0] * len(factors)
    powers = list(powers)
    if len(powers) != len(factors):
        raise ValueError("powers and factors differ in length")
    log_value = math.log(abs(scale)) if scale != 0.0 else -math.inf
    rel_var = 0.0
    n = 1
    for factor, power in zip(factors, powers):
        if factor.value <= 0.0:
            return MCEstimate(0.0, 0.0 if factor.stderr == 0.0 else abs(scale) * factor.stderr,
                              max(n, factor.n))
        log_value += power * math.log(factor.value)
        rel_var += (power * factor.stderr / factor.value) ** 2
        n = max(n, factor.n)
    value = math.copysign(math.exp(log_value), scale) if scale != 0.0 else 0.0
    return MCEstimate(value, abs(value) * math.sqrt(rel_var), n)


def ratio_estimate(numerator: MCEstimate, denominator: MCEstimate) -> MCEstimate:
    """Quotient of independent estimates with delta-method error."""
    if denominator.value == 0.0:
        raise ZeroDivisionError("denominator estimate is zero")
    value = numerator.value / denominator.value
    rel_var = (denominator.stderr / denominator.value) ** 2
    if numerator.value != 0.0:
        rel_var += (numerator.stderr / numerator.value) ** 2
        stderr = abs(value) * math.sqrt(rel_var)
    else:
        stderr = numerator.stderr / abs(denominator.value)
    return MCEstimate(value, stderr, max(numerator.n, denominator.n))
