"""Tests for integrals against the binary dislocation measure."""
import math

import numpy as np
import pytest
from scipy import integrate

from CoalescentLab.analyzer.quadrature import (
    HALF_ROOT, NU_FIRST_MOMENT, DislocationKernel, QuadratureError, adaptive_quad, gauss_legendre_panels,
    nu_density, nu_functional,
)


def first_moment(y1, y2):
    return 1.0 - y1


def midpoint_oracle(phi, points):
    """Midpoint rule in w = sqrt(1 - y) on a uniform mesh of (0, 1/sqrt(2))."""
    h = HALF_ROOT / points
    w = (np.arange(points) + 0.5) * h
    w2 = w * w
    values = 2.0 / math.sqrt(2.0 * math.pi) * phi(1.0 - w2, w2) / ((1.0 - w2) ** 1.5 * w2)
    return float(values.sum() * h)


def test_first_moment_closed_form():
    assert nu_functional(first_moment, tol=1e-10) == pytest.approx(NU_FIRST_MOMENT, abs=1e-8)


def test_first_moment_against_mesh_oracle():
    assert nu_functional(first_moment, tol=1e-10) == pytest.approx(
        midpoint_oracle(first_moment, 1_000_000), abs=1e-6)


@pytest.mark.slow
def test_first_moment_against_fine_mesh_oracle():
    assert nu_functional(first_moment, tol=1e-10) == pytest.approx(
        midpoint_oracle(first_moment, 10_000_000), abs=1e-6)


def test_functional_of_zero_and_ordering():
    assert nu_functional(lambda y1, y2: 0.0) == 0.0
    squared = nu_functional(lambda y1, y2: (1.0 - y1) ** 2, tol=1e-8)
    assert 0.0 < squared < NU_FIRST_MOMENT


def test_nu_density_matches_integrand():
    value, _ = integrate.quad(lambda y: (1.0 - y) * nu_density(y), 0.5, 1.0, limit=200)
    assert value == pytest.approx(NU_FIRST_MOMENT, abs=1e-6)
    with pytest.raises(ValueError):
        nu_density(0.25)


def test_non_integrable_functional_is_reported():
    with pytest.raises(QuadratureError):
        nu_functional(lambda y1, y2: 1.0, tol=1e-8)


def test_adaptive_quad_panels():
    value, abserr, panels = adaptive_quad(math.sin, 0.0, math.pi, 1e-10, full_output=True)
    assert value == pytest.approx(2.0, abs=1e-10)
    assert abserr <= 1e-10
    assert panels[0][0] == 0.0
    assert all(lo < hi for lo, hi in panels)
    with pytest.raises(ValueError):
        adaptive_quad(math.sin, 0.0, 1.0, 0.0)


def test_gauss_legendre_panels_integrate_polynomials():
    nodes, weights = gauss_legendre_panels([(0.0, 0.5), (0.5, 2.0)], order=5)
    assert nodes.size == 10
    assert float(weights @ nodes ** 3) == pytest.approx(4.0, rel=1e-12)


def test_kernel_weight_is_symmetric():
    ys = np.array([0.1, 0.3, 0.45])
    assert np.allclose(DislocationKernel.weight(ys), DislocationKernel.weight(1.0 - ys))
    assert DislocationKernel.weight(0.5) == pytest.approx(8.0 / math.sqrt(8.0 * math.pi))
    with pytest.raises(ValueError):
        DislocationKernel.weight(1.0)
    with pytest.raises(ValueError):
        DislocationKernel.weight(np.array([0.2, 0.0]))


def test_kernel_lower_half_rule_matches_direct_integral():
    edges = np.linspace(0.0, HALF_ROOT, 33)
    v, weights = gauss_legendre_panels(list(zip(edges[:-1], edges[1:])))
    y = v * v
    doubled = 2.0 * float(weights @ (y * (1.0 - y) * DislocationKernel.lower_half_density(v)))
    direct, _ = integrate.quad(lambda s: float(DislocationKernel.weight(s)) * s * (1.0 - s), 0.0, 1.0, limit=200)
    assert doubled == pytest.approx(math.sqrt(math.pi / 8.0), rel=1e-10)
    assert doubled == pytest.approx(direct, rel=1e-6)
