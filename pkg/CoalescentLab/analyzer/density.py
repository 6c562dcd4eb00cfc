"""Gaussian and Monte Carlo densities behind the change of measure.

Every density ratio q_s(u)/p_s(u) is computed through the subordinator identity

    q_s(u)/p_s(u) = exp(c u - c^2 s/2) E[exp(-Gamma_s^2/(2s) - Gamma_s (u/s - c))]

with exact draws of Gamma_s, never by deconvolving q. Without an explicit
generator, each factor draws from a stream keyed by (seed, quantity, arguments),
so memoized values are the same in every process.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

from CoalescentLab.model.estimate import MCEstimate, product_estimate, ratio_estimate
from CoalescentLab.model.partition import MassPartition
from CoalescentLab.model.subordinator import ZERO, SubordinatorSpec, sample_gamma_increments
from CoalescentLab.utils.logger import get_logger
from CoalescentLab.utils.streams import substream

MIN_QUERY_MC = 1000
TRUNCATION_TOL = 1e-6
DEFAULT_MC = 10_000
DEFAULT_NORMALIZER_MC = 1_000_000
NORMALIZER_REL_WARN = 1e-2


def gaussian_density(t: float, u: float) -> float:
    """p_t(u) = exp(-u^2/(2t)) / sqrt(2 pi t)."""
    if not t > 0:
        raise ValueError(f"gaussian_density needs t > 0, got {t}")
    return math.exp(-u * u / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


@dataclass(frozen=True)
class RatioQuery:
    """Arguments of one evaluation of q_s(u)/p_s(u)."""

    spec: SubordinatorSpec
    s: float
    u: float
    mc_samples: int = DEFAULT_MC

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"ratio query needs s > 0, got {self.s}")
        if not math.isfinite(self.u):
            raise ValueError(f"ratio query needs a finite u, got {self.u}")
        if self.mc_samples < MIN_QUERY_MC:
            raise ValueError(f"mc_samples must be >= {MIN_QUERY_MC}, got {self.mc_samples}")


def ratio_weights(gammas: np.ndarray, s: float, u: float, c: float) -> np.ndarray:
    """exp(-G^2/(2s) - G (u/s - c)) for an array of Gamma_s draws."""
    return np.exp(-gammas * gammas / (2.0 * s) - gammas * (u / s - c))


def ratio_prefactor(spec: SubordinatorSpec, s: float, u: float) -> float:
    return math.exp(spec.c * u - spec.c * spec.c * s / 2.0)


def ratio_q_over_p(query: RatioQuery, rng: np.random.Generator) -> MCEstimate:
    """Unbiased estimate of q_s(u)/p_s(u) from ``query.mc_samples`` exact draws."""
    spec = query.spec
    scale = ratio_prefactor(spec, query.s, query.u)
    if spec.kind == ZERO:
        return MCEstimate.exact(scale, query.mc_samples)
    gammas = sample_gamma_increments(spec, query.s, query.mc_samples, rng)
    return MCEstimate.from_samples(ratio_weights(gammas, query.s, query.u, spec.c), scale)


def g_weights(gammas: np.ndarray, t: float, x: float, c: float) -> np.ndarray:
    """exp(-G^2/(2x) + G (t + c)), the integrand of g(t, x)."""
    return np.exp(-gammas * gammas / (2.0 * x) + gammas * (t + c))


def brownian_marginal_density(t: float, z: float) -> float:
    """Size-biased fragment density under the Brownian law, q = p."""
    if not 0.0 < z < 1.0:
        raise ValueError(f"z must lie in (0, 1), got {z}")
    if t == 0:
        return 0.0
    return (t * gaussian_density(z, -t * z) * gaussian_density(1.0 - z, z * t)
            / ((1.0 - z) * gaussian_density(1.0, 0.0)))


def brownian_marginal_cdf(t: float, z: float) -> float:
    """P(tagged fragment <= z); t^2 Z/(1-Z) is chi-square with one degree of freedom."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if z <= 0.0:
        return 0.0
    if z >= 1.0 or t == 0:
        return 1.0 if z >= 1.0 else 0.0
    return float(stats.chi2.cdf(t * t * z / (1.0 - z), 1))


def brownian_marginal_edges(t: float, bins: int) -> np.ndarray:
    """Bin edges on [0, 1] with equal Brownian probability in every bin."""
    if not t > 0:
        raise ValueError(f"equal-probability bins need t > 0, got {t}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    quantiles = stats.chi2.ppf(np.arange(1, bins) / bins, 1)
    edges = np.empty(bins + 1)
    edges[0], edges[-1] = 0.0, 1.0
    edges[1:-1] = quantiles / (t * t + quantiles)
    return edges


class DensityEvaluator:
    """Monte Carlo densities for one subordinator specification.

    ``mc`` is the sample count for every factor; the normalizer q_1(0)/p_1(0)
    gets its own budget ``normalizer_mc`` and is estimated once.
    """

    def __init__(self, spec: SubordinatorSpec, mc: int = DEFAULT_MC,
                 normalizer_mc: int = DEFAULT_NORMALIZER_MC, seed: int = 0):
        if mc < 1 or normalizer_mc < 1:
            raise ValueError("Monte Carlo sample counts must be >= 1")
        self.spec = spec
        self.mc = int(mc)
        self.normalizer_mc = int(normalizer_mc)
        self.seed = int(seed)
        self.logger = get_logger()
        self._key = spec.key()
        self._ratio_cache: Dict[Tuple[float, float], MCEstimate] = {}
        self._g_cache: Dict[Tuple[float, float], MCEstimate] = {}
        self._normalizer: Optional[MCEstimate] = None

    @property
    def exact(self) -> bool:
        """True when every factor is deterministic (the Zero spec)."""
        return self.spec.kind == ZERO

    def _stream(self, quantity: str, *args) -> np.random.Generator:
        return substream(self.seed, quantity, self._key, *args)

    def ratio_q_over_p(self, s: float, u: float,
                       rng: Optional[np.random.Generator] = None) -> MCEstimate:
        """q_s(u)/p_s(u); memoized when no generator is passed."""
        if not s > 0:
            raise ValueError(f"ratio needs s > 0, got {s}")
        s, u = float(s), float(u)
        if rng is not None:
            return self._ratio(s, u, self.mc, rng)
        cached = self._ratio_cache.get((s, u))
        if cached is None:
            cached = self._ratio(s, u, self.mc, self._stream('ratio', s, u, self.mc))
            self._ratio_cache[(s, u)] = cached
        return cached

    def _ratio(self, s: float, u: float, mc: int, rng: np.random.Generator) -> MCEstimate:
        scale = ratio_prefactor(self.spec, s, u)
        if self.exact:
            return MCEstimate.exact(scale, mc)
        gammas = sample_gamma_increments(self.spec, s, mc, rng)
        return MCEstimate.from_samples(ratio_weights(gammas, s, u, self.spec.c), scale)

    def normalizer(self) -> MCEstimate:
        """q_1(0)/p_1(0), estimated once with ``normalizer_mc`` samples."""
        if self._normalizer is None:
            rng = self._stream('normalizer', self.normalizer_mc)
            self._normalizer = self._ratio(1.0, 0.0, self.normalizer_mc, rng)
            self.logger.debug(f"normalizer q1(0)/p1(0) = {self._normalizer.value!r} "
                              f"+/- {self._normalizer.stderr!r}")
            if self._normalizer.relative_error() > NORMALIZER_REL_WARN:
                self.logger.warning(f"normalizer relative error {self._normalizer.relative_error():.2%} "
                                    f"exceeds {NORMALIZER_REL_WARN:.0%}; raise normalizer_mc above {self.normalizer_mc}")
        return self._normalizer

    def g(self, t: float, x: float, rng: Optional[np.random.Generator] = None) -> MCEstimate:
        """g(t, x) = exp(-x c^2/2) E[exp(-Gamma_x^2/(2x) + Gamma_x (t + c))], g(t, 0) = 1."""
        if t < 0:
            raise ValueError(f"g needs t >= 0, got {t}")
        if x == 0:
            return MCEstimate.exact(1.0, self.mc)
        if not 0.0 < x <= 1.0:
            raise ValueError(f"g needs x in (0, 1], got {x}")
        t, x = float(t), float(x)
        if rng is not None:
            return self._g(t, x, rng)
        cached = self._g_cache.get((t, x))
        if cached is None:
            cached = self._g(t, x, self._stream('g', t, x, self.mc))
            self._g_cache[(t, x)] = cached
        return cached

    def _g(self, t: float, x: float, rng: np.random.Generator) -> MCEstimate:
        scale = math.exp(-x * self.spec.c * self.spec.c / 2.0)
        if self.exact:
            return MCEstimate.exact(scale, self.mc)
        gammas = sample_gamma_increments(self.spec, x, self.mc, rng)
        return MCEstimate.from_samples(g_weights(gammas, t, x, self.spec.c), scale)

    def h(self, t: float, x: float, rng: Optional[np.random.Generator] = None) -> MCEstimate:
        """h(t, x) = (p_1(0)/q_1(0))^x g(t, x)."""
        return product_estimate([self.normalizer(), self.g(t, x, rng)], [-float(x), 1.0])

    def H_product(self, t: float, partition: MassPartition,
                  rng: Optional[np.random.Generator] = None, truncate: bool = False) -> MCEstimate:
        """The density (p_1(0)/q_1(0)) prod g(t, x_i) of a normalized partition.

        With ``truncate`` the product stops once exp(t^2 m/2) - 1 < 1e-6, m being
        the mass not yet included; the first fragment is always kept.
        """
        partition.require_normalized()
        if self.exact:
            return MCEstimate.exact(1.0, self.mc)
        masses = partition.masses
        if t == 0 and masses.size == 1:
            # g(0, 1) is the normalizer itself
            return MCEstimate.exact(1.0, self.normalizer_mc)
        factors = [self.normalizer()]
        powers = [-1.0]
        remaining = partition.total
        for x in masses.tolist():
            if truncate and len(factors) > 1 and math.expm1(t * t * remaining / 2.0) < TRUNCATION_TOL:
                break
            factors.append(self.g(t, x, rng))
            powers.append(1.0)
            remaining -= x
        return product_estimate(factors, powers)

    def h_n(self, t: float, xs: Sequence[float],
            rng: Optional[np.random.Generator] = None) -> MCEstimate:
        """Density of the first n size-biased fragments being (x_1, ..., x_n)."""
        xs = [float(x) for x in xs]
        if not xs or any(not x > 0 for x in xs):
            raise ValueError("h_n needs at least one strictly positive mass")
        total = math.fsum(xs)
        if total >= 1.0:
            raise ValueError(f"h_n needs sum(x) < 1, got {total!r}")
        factors = [self.normalizer(), self.ratio_q_over_p(1.0 - total, total * t, rng)]
        factors.extend(self.ratio_q_over_p(x, -t * x, rng) for x in xs)
        return product_estimate(factors, [-1.0] + [1.0] * (len(factors) - 1))

    def size_biased_joint_density(self, t: float, xs: Sequence[float],
                                  rng: Optional[np.random.Generator] = None) -> MCEstimate:
        """t^n q_{1-S}(St) prod q_{x_i}(-t x_i)/(1 - S_i) / q_1(0)."""
        xs = [float(x) for x in xs]
        if not xs or any(not x > 0 for x in xs):
            raise ValueError("joint density needs at least one strictly positive mass")
        total = math.fsum(xs)
        if total >= 1.0:
            raise ValueError(f"joint density needs sum(x) < 1, got {total!r}")
        if t == 0:
            return MCEstimate.exact(0.0, self.mc)
        scale = t ** len(xs) * gaussian_density(1.0 - total, total * t) / gaussian_density(1.0, 0.0)
        partial = 0.0
        for x in xs:
            partial += x
            scale *= gaussian_density(x, -t * x) / (1.0 - partial)
        factors = [self.normalizer(), self.ratio_q_over_p(1.0 - total, total * t, rng)]
        factors.extend(self.ratio_q_over_p(x, -t * x, rng) for x in xs)
        return product_estimate(factors, [-1.0] + [1.0] * (len(factors) - 1), scale)

    def size_biased_marginal_density(self, t: float, z: float,
                                     rng: Optional[np.random.Generator] = None) -> MCEstimate:
        """Density at z of the first size-biased fragment at time t."""
        if not 0.0 < z < 1.0:
            raise ValueError(f"z must lie in (0, 1), got {z}")
        if t < 0:
            raise ValueError(f"t must be >= 0, got {t}")
        if self.exact:
            return MCEstimate.exact(brownian_marginal_density(t, z), self.mc)
        return self.size_biased_joint_density(t, [z], rng)

    def weighted_tail_probability(self, t: float, threshold: float, nodes: int = 64) -> MCEstimate:
        """P(largest fragment > threshold) for threshold >= 1/2.

        At most one fragment exceeds 1/2, so the probability is the integral of
        the size-biased density divided by z over (threshold, 1). Gauss-Legendre
        nodes in w with z = 1 - (1 - threshold) w^2 absorb the decay at z = 1.
        """
        if not 0.5 <= threshold < 1.0:
            raise ValueError(f"threshold must lie in [1/2, 1), got {threshold}")
        if t < 0:
            raise ValueError(f"t must be >= 0, got {t}")
        if t == 0:
            return MCEstimate.exact(1.0, self.mc)
        if self.exact:
            value, _ = integrate.quad(lambda z: brownian_marginal_density(t, z) / z, threshold, 1.0,
                                      epsabs=1e-12, limit=200)
            return MCEstimate.exact(value, self.mc)
        roots, weights = special.roots_legendre(nodes)
        w_nodes = 0.5 * (roots + 1.0)
        w_weights = 0.5 * weights
        width = 1.0 - threshold
        total, variance = 0.0, 0.0
        for w, weight in zip(w_nodes.tolist(), w_weights.tolist()):
            z = 1.0 - width * w * w
            jacobian = 2.0 * width * w
            base = t * gaussian_density(z, -t * z) * gaussian_density(1.0 - z, z * t) / (
                (1.0 - z) * gaussian_density(1.0, 0.0) * z)
            term = product_estimate([self.ratio_q_over_p(z, -t * z),
                                     self.ratio_q_over_p(1.0 - z, z * t)],
                                    scale=weight * jacobian * base)
            total += term.value
            variance += term.stderr ** 2
        integral = MCEstimate(total, math.sqrt(variance), self.mc)
        return ratio_estimate(integral, self.normalizer())
