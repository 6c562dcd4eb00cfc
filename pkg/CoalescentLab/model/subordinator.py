"""Drift-free subordinators with exact increment samplers.

A specification couples a subordinator Gamma (zero, compound Poisson or gamma
process) with the drift constant c of X = B - Gamma + c t. Only kinds whose
increments can be drawn exactly over any time span are admitted.
"""
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy import integrate, special

ZERO = 'zero'
COMPOUND_POISSON = 'compound_poisson'
GAMMA = 'gamma'
KINDS = (ZERO, COMPOUND_POISSON, GAMMA)


@dataclass(frozen=True)
class JumpLaw:
    """Jump-size law of a compound Poisson subordinator."""

    dist: str
    param: float

    def __post_init__(self):
        if self.dist not in ('constant', 'exponential'):
            raise ValueError(f"unknown jump law {self.dist!r}")
        if not (self.param > 0.0 and math.isfinite(self.param)):
            raise ValueError(f"jump law parameter must be positive and finite, got {self.param}")

    @classmethod
    def constant(cls, a: float) -> 'JumpLaw':
        return cls('constant', float(a))

    @classmethod
    def exponential(cls, mean: float) -> 'JumpLaw':
        return cls('exponential', float(mean))

    def mean(self) -> float:
        return self.param

    def laplace(self, q: float) -> float:
        """E exp(-q J) in closed form."""
        if self.dist == 'constant':
            return math.exp(-q * self.param)
        return 1.0 / (1.0 + q * self.param)

    def tail(self, t: float) -> float:
        """P(J > t)."""
        if self.dist == 'constant':
            return 1.0 if t < self.param else 0.0
        return math.exp(-t / self.param)

    def sum_of(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sums of ``counts[i]`` i.i.d. jumps, drawn exactly."""
        counts = np.asarray(counts)
        if self.dist == 'constant':
            return self.param * counts.astype(float)
        # a sum of k exponentials is gamma(k); numpy returns 0 for shape 0
        return rng.gamma(counts.astype(float), self.param)

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.dist == 'constant':
            return np.full(size, self.param)
        return rng.exponential(self.param, size)

    def to_dict(self) -> Dict[str, Any]:
        key = 'a' if self.dist == 'constant' else 'mean'
        return {'dist': self.dist, key: self.param}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'JumpLaw':
        dist = data.get('dist')
        if dist == 'constant':
            return cls.constant(_number(data, 'a'))
        if dist == 'exponential':
            return cls.exponential(_number(data, 'mean'))
        raise ValueError(f"unknown jump law {dist!r}")


@dataclass(frozen=True)
class SubordinatorSpec:
    """A drift-free subordinator plus the drift constant c."""

    kind: str
    c: float
    rate: float = 0.0
    jump: Optional[JumpLaw] = None
    shape: float = 0.0
    gamma_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown subordinator kind {self.kind!r}")
        if self.kind == COMPOUND_POISSON:
            if not self.rate > 0.0:
                raise ValueError(f"compound Poisson rate must be positive, got {self.rate}")
            if self.jump is None:
                raise ValueError("compound Poisson spec needs a jump law")
        if self.kind == GAMMA and not (self.shape > 0.0 and self.gamma_rate > 0.0):
            raise ValueError("gamma spec needs positive shape and rate")
        if not math.isfinite(self.c):
            raise ValueError(f"drift constant must be finite, got {self.c}")
        mean = mean_rate(self)
        if self.c < mean:
            raise ValueError(f"drift constant c={self.c} is below E(Gamma_1)={mean}")

    @classmethod
    def zero(cls, c: float = 0.0) -> 'SubordinatorSpec':
        return cls(ZERO, float(c))

    @classmethod
    def compound_poisson(cls, rate: float, jump: JumpLaw, c: float) -> 'SubordinatorSpec':
        return cls(COMPOUND_POISSON, float(c), rate=float(rate), jump=jump)

    @classmethod
    def gamma(cls, shape: float, rate: float, c: float) -> 'SubordinatorSpec':
        return cls(GAMMA, float(c), shape=float(shape), gamma_rate=float(rate))

    @property
    def finite_levy_measure(self) -> bool:
        return self.kind != GAMMA

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == ZERO:
            return {'kind': ZERO, 'c': self.c}
        if self.kind == COMPOUND_POISSON:
            return {'kind': COMPOUND_POISSON, 'rate': self.rate,
                    'jump': self.jump.to_dict(), 'c': self.c}
        return {'kind': GAMMA, 'shape': self.shape, 'rate': self.gamma_rate, 'c': self.c}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def key(self) -> str:
        """Canonical text used to key streams and caches."""
        return self.to_json()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SubordinatorSpec':
        if not isinstance(data, dict):
            raise ValueError("subordinator spec must be a JSON object")
        if 'c' not in data:
            raise ValueError("subordinator spec requires the field 'c'")
        kind = data.get('kind')
        c = _number(data, 'c')
        if kind == ZERO:
            return cls.zero(c)
        if kind == COMPOUND_POISSON:
            if 'jump' not in data:
                raise ValueError("compound Poisson spec requires the field 'jump'")
            return cls.compound_poisson(_number(data, 'rate'), JumpLaw.from_dict(data['jump']), c)
        if kind == GAMMA:
            return cls.gamma(_number(data, 'shape'), _number(data, 'rate'), c)
        raise ValueError(f"unknown subordinator kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> 'SubordinatorSpec':
        return cls.from_dict(json.loads(text))


def _number(data: Dict[str, Any], name: str) -> float:
    if name not in data:
        raise ValueError(f"missing field {name!r}")
    value = data[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"field {name!r} must be a number, got {value!r}")
    return float(value)


class EquivalenceVerdict(str, Enum):
    """Outcome of the finite-grid surrogate for the positivity condition."""

    HOLDS = 'holds_numerically'
    FAILS = 'fails_numerically'


def laplace_exponent(spec: SubordinatorSpec, q: float) -> float:
    """phi(q) with E exp(-q Gamma_s) = exp(-s phi(q))."""
    if q < 0:
        raise ValueError(f"Laplace exponent needs q >= 0, got {q}")
    if spec.kind == ZERO:
        return 0.0
    if spec.kind == COMPOUND_POISSON:
        return spec.rate * (1.0 - spec.jump.laplace(q))
    return spec.shape * math.log1p(q / spec.gamma_rate)


def mean_rate(spec: SubordinatorSpec) -> float:
    """E Gamma_1."""
    if spec.kind == ZERO:
        return 0.0
    if spec.kind == COMPOUND_POISSON:
        return spec.rate * spec.jump.mean()
    return spec.shape / spec.gamma_rate


def levy_mass(spec: SubordinatorSpec) -> float:
    """Total mass pi(]0, inf[) of the Levy measure."""
    if spec.kind == ZERO:
        return 0.0
    if spec.kind == COMPOUND_POISSON:
        return spec.rate
    return math.inf


def sample_gamma_increments(spec: SubordinatorSpec, s: float, size: int,
                            rng: np.random.Generator) -> np.ndarray:
    """``size`` independent exact draws of Gamma_s."""
    if not s > 0:
        raise ValueError(f"increment length must be positive, got {s}")
    if spec.kind == ZERO:
        return np.zeros(size)
    if spec.kind == COMPOUND_POISSON:
        counts = rng.poisson(spec.rate * s, size)
        return spec.jump.sum_of(counts, rng)
    return rng.gamma(spec.shape * s, 1.0 / spec.gamma_rate, size)


def sample_gamma_increment(spec: SubordinatorSpec, s: float, rng: np.random.Generator) -> float:
    """One exact draw of Gamma_s."""
    return float(sample_gamma_increments(spec, s, 1, rng)[0])


def integrated_tail(spec: SubordinatorSpec, x: float) -> float:
    """I(x), the integral over [0, x] of the Levy tail pi(]t, inf[)."""
    if not x > 0:
        raise ValueError(f"integrated tail needs x > 0, got {x}")
    if spec.kind == ZERO:
        return 0.0
    if spec.kind == COMPOUND_POISSON:
        if spec.jump.dist == 'constant':
            return spec.rate * min(x, spec.jump.param)
        mu = spec.jump.param
        return spec.rate * mu * -math.expm1(-x / mu)
    # gamma Levy measure a t^-1 e^(-b t) dt has tail a E1(b t)
    a, b = spec.shape, spec.gamma_rate
    value, _ = integrate.quad(lambda t: a * special.exp1(b * t), 0.0, x, limit=200)
    return float(value)


def classify_equivalence(spec: SubordinatorSpec, delta: float, x_max: float = 1e6,
                         tol: float = 1e-2, points: int = 64) -> EquivalenceVerdict:
    """Finite-grid surrogate for phi(x) x^(delta-1) -> 0 as x -> infinity.

    The sequence is evaluated on a geometric grid over [1, x_max]; the verdict is
    HOLDS when its last quarter is nonincreasing and the final value is below tol.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if x_max < 1e3:
        raise ValueError(f"x_max must be >= 1e3, got {x_max}")
    grid = np.geomspace(1.0, x_max, points)
    values = np.array([laplace_exponent(spec, x) for x in grid]) * grid ** (delta - 1.0)
    tail = values[-max(2, points // 4):]
    decreasing = bool(np.all(np.diff(tail) <= 1e-15 * np.maximum(1.0, tail[:-1])))
    if decreasing and values[-1] < tol:
        return EquivalenceVerdict.HOLDS
    return EquivalenceVerdict.FAILS


def positivity_lower_bound(spec: SubordinatorSpec, y: float, k: float) -> float:
    """Lower bound exp(-phi(K) y) - A/(2A+K) for E[exp(-Gamma_y^2/(2y) + c Gamma_y)]."""
    if not (y > 0 and k > 0):
        raise ValueError("positivity bound needs y > 0 and K > 0")
    a = mean_rate(spec)
    return math.exp(-laplace_exponent(spec, k) * y) - a / (2.0 * a + k)


SpecLike = Union[SubordinatorSpec, Dict[str, Any], str]


def as_spec(value: SpecLike) -> SubordinatorSpec:
    """Accept a spec, a decoded JSON object or JSON text."""
    if isinstance(value, SubordinatorSpec):
        return value
    if isinstance(value, str):
        return SubordinatorSpec.from_json(value)
    return SubordinatorSpec.from_dict(value)
