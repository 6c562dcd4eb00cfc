"""Shared fixtures for the CoalescentLab test suite."""
import logging
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from CoalescentLab.model.subordinator import JumpLaw, SubordinatorSpec  # noqa: E402
from CoalescentLab.utils import logger as logger_module  # noqa: E402

# Statistical assertions use this many standard errors.
K_SIGMA = 4.0


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(20240617)))


@pytest.fixture
def poisson_spec():
    """Compound Poisson, rate 1, unit jumps, c = 1."""
    return SubordinatorSpec.compound_poisson(1.0, JumpLaw.constant(1.0), 1.0)


@pytest.fixture
def gamma_spec():
    return SubordinatorSpec.gamma(1.0, 2.0, 1.0)


@pytest.fixture
def zero_spec():
    return SubordinatorSpec.zero(0.7)


def poisson_g_series(t: float, x: float, rate: float = 1.0, a: float = 1.0, c: float = 1.0,
                     terms: int = 60) -> float:
    """g(t, x) for unit-rate constant jumps, summed over the Poisson jump count."""
    total, weight = 0.0, np.exp(-rate * x)
    for k in range(terms):
        total += weight * np.exp(-(a * k) ** 2 / (2.0 * x) + a * k * (t + c))
        weight *= rate * x / (k + 1)
    return float(np.exp(-x * c * c / 2.0) * total)


@pytest.fixture(autouse=True)
def fresh_logger():
    """Drop logging handlers bound to a previous test's captured stderr."""
    yield
    package_logger = logging.getLogger('CoalescentLab')
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
        handler.close()
    logger_module._shared = None
