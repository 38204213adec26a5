"""Oracle tests for the scalar special functions.

The quantile oracle is a bisection solve of the erf-based CDF, written before
the implementation and independent of it; scipy provides a second opinion.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.special
import scipy.stats

from fddkey._special import igamc, std_normal_cdf, std_normal_quantile


def quantile_by_bisection(p: float, tol: float = 1e-12) -> float:
    """Solve Phi(x) = p on a bracket, no reliance on the package code path."""
    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(-mid / math.sqrt(2.0)) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestNormalQuantile:
    def test_frozen_interior_value(self):
        # Bisection oracle gives Phi^-1(0.6) = 0.2533471031357997...
        assert std_normal_quantile(0.6) == pytest.approx(0.2533471031357997, abs=1e-9)

    def test_median_is_zero(self):
        assert std_normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        for p in (0.01, 0.1, 0.25, 0.45):
            assert std_normal_quantile(p) == pytest.approx(-std_normal_quantile(1.0 - p), abs=1e-9)

    def test_against_bisection_grid(self):
        for p in (1e-6, 1e-3, 0.02, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999, 1 - 1e-6):
            assert std_normal_quantile(p) == pytest.approx(quantile_by_bisection(p), abs=1e-9)

    def test_against_scipy(self):
        rng = np.random.default_rng(7)
        for p in rng.uniform(1e-9, 1.0 - 1e-9, size=200):
            assert std_normal_quantile(float(p)) == pytest.approx(
                scipy.stats.norm.ppf(p), abs=1e-9)

    def test_round_trip_through_cdf(self):
        for p in (0.001, 0.2, 0.5, 0.8, 0.999):
            assert std_normal_cdf(std_normal_quantile(p)) == pytest.approx(p, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.3])
    def test_rejects_out_of_domain(self, p):
        with pytest.raises(ValueError, match="quantile argument"):
            std_normal_quantile(p)


class TestNormalCdf:
    def test_center_and_tails(self):
        assert std_normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
        assert std_normal_cdf(-8.0) == pytest.approx(scipy.stats.norm.cdf(-8.0), rel=1e-12)
        assert std_normal_cdf(8.0) == pytest.approx(1.0, abs=1e-15)

    def test_matches_scipy_on_grid(self):
        xs = np.linspace(-10.0, 10.0, 401)
        ours = np.array([std_normal_cdf(float(x)) for x in xs])
        np.testing.assert_allclose(ours, scipy.stats.norm.cdf(xs), rtol=1e-12, atol=1e-300)


class TestIgamc:
    def test_against_scipy_wide_grid(self):
        # Shapes span every chi-square half-dof the suite uses (N/2, 2^{m-1}, ...).
        shapes = [0.5, 1.0, 2.0, 2.5, 4.0, 8.0, 16.0, 64.0]
        xs = [1e-8, 0.01, 0.3, 1.0, 2.7, 5.0, 13.0, 40.0, 200.0]
        for a in shapes:
            for x in xs:
                expected = scipy.special.gammaincc(a, x)
                got = igamc(a, x)
                if expected > 1e-300:
                    assert got == pytest.approx(expected, rel=1e-10), (a, x)
                else:
                    assert got == pytest.approx(expected, abs=1e-300)

    def test_boundaries(self):
        assert igamc(3.0, 0.0) == 1.0
        assert igamc(1.0, 700.0) == pytest.approx(0.0, abs=1e-300)

    def test_exponential_special_case(self):
        # Q(1, x) = exp(-x) exactly.
        for x in (0.1, 1.0, 5.0, 20.0):
            assert igamc(1.0, x) == pytest.approx(math.exp(-x), rel=1e-12)

    def test_rejects_bad_domain(self):
        with pytest.raises(ValueError, match="shape"):
            igamc(0.0, 1.0)
        with pytest.raises(ValueError, match="non-negative"):
            igamc(1.0, -1.0)
