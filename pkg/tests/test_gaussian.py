import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, stats

from pqnorms.gaussian import (
    SQRT_2_OVER_PI,
    concentration_tail,
    decreasing_rearrangement,
    expected_lp_upper,
    expected_max_abs,
    gamma_r,
    maxgaus_comparator,
    orlicz_Mg,
    orlicz_norm,
)

weights = arrays(np.float64, st.integers(1, 40), elements=st.floats(0.0, 10.0))


def emax_direct(a):
    """Tail integral with the plain product of normal CDFs (fine for short vectors)."""
    a = np.abs(np.asarray(a, dtype=float))
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    f = lambda t: 1.0 - np.prod(2 * stats.norm.cdf(t / a) - 1)
    return integrate.quad(f, 0, 40 * a.max(), limit=500, epsabs=1e-12)[0]


def mg_quad(s):
    # u = 1/t turns the integral into a Gaussian-weighted tail starting at 1/s
    f = lambda u: math.exp(-u * u / 2) / (u * u)
    return SQRT_2_OVER_PI * integrate.quad(f, 1 / s, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]


class TestGammaR:
    def test_closed_values(self):
        np.testing.assert_allclose(gamma_r(1), math.sqrt(2 / math.pi), rtol=1e-14)
        np.testing.assert_allclose(gamma_r(2), 1.0, rtol=1e-14)
        np.testing.assert_allclose(gamma_r(4), 3 ** 0.25, rtol=1e-14)

    @pytest.mark.parametrize("r", [1.5, 3.0, 7.0, 12.5])
    def test_against_moment_integral(self, r):
        mom = 2 * integrate.quad(lambda x: x ** r * stats.norm.pdf(x), 0, np.inf, epsabs=1e-14)[0]
        np.testing.assert_allclose(gamma_r(r), mom ** (1 / r), rtol=1e-10)

    def test_large_r_and_domain(self):
        assert math.isfinite(gamma_r(500.0))
        for bad in (0.5, math.inf, math.nan):
            with pytest.raises(ValueError):
                gamma_r(bad)

    def test_growth_like_sqrt_r(self):
        ratios = [gamma_r(r) / math.sqrt(r) for r in np.linspace(1, 64, 200)]
        assert 0.5 <= min(ratios) and max(ratios) <= 1.0

    def test_increasing(self):
        rs = np.linspace(1, 30, 60)
        assert np.all(np.diff([gamma_r(r) for r in rs]) > 0)


class TestExpectedMaxAbs:
    def test_single(self):
        np.testing.assert_allclose(expected_max_abs([1.0]), SQRT_2_OVER_PI, rtol=1e-10)
        np.testing.assert_allclose(expected_max_abs([-3.0, 0.0]), 3 * SQRT_2_OVER_PI, rtol=1e-10)

    def test_zero_and_empty(self):
        assert expected_max_abs([0.0, 0.0]) == 0.0
        with pytest.raises(ValueError):
            expected_max_abs([])

    @pytest.mark.parametrize("a", [[1, 1], [1, 0.5, 0.25], [2, 1, 1, 1, 0.1], np.linspace(0.1, 1, 12)])
    def test_against_direct_product(self, a):
        np.testing.assert_allclose(expected_max_abs(a), emax_direct(a), rtol=1e-8)

    def test_long_vector_no_underflow(self):
        v = expected_max_abs(np.ones(100_000))
        # E max of n half-normals grows like sqrt(2 ln n)
        assert 0.85 * math.sqrt(2 * math.log(1e5)) < v < math.sqrt(2 * math.log(2e5))

    @settings(max_examples=40, deadline=None)
    @given(weights, st.floats(0.01, 100))
    def test_homogeneous_and_monotone(self, a, c):
        base = expected_max_abs(a)
        np.testing.assert_allclose(expected_max_abs(c * a), c * base, rtol=1e-7, atol=1e-12)
        assert expected_max_abs(np.append(a, 1.0)) >= base - 1e-9
        assert base <= expected_lp_upper(a, 1) + 1e-9 if a.size else True


class TestComparator:
    def test_example(self):
        expect = max(math.sqrt(math.log(4)) * 2, math.sqrt(math.log(5)) * 1)
        np.testing.assert_allclose(maxgaus_comparator([1.0, -2.0]), expect, rtol=1e-15)

    def test_rearrangement(self):
        np.testing.assert_array_equal(decreasing_rearrangement([1, -3, 2]), [3, 2, 1])

    @settings(max_examples=40, deadline=None)
    @given(weights)
    def test_permutation_invariant(self, a):
        assert maxgaus_comparator(a) == maxgaus_comparator(a[::-1])


class TestOrlicz:
    @pytest.mark.parametrize("s", [0.03, 0.05, 0.0884, 0.1, 0.3, 1.0, 2.5, 10.0, 100.0])
    def test_closed_form_vs_quadrature(self, s):
        np.testing.assert_allclose(orlicz_Mg(s), mg_quad(s), rtol=1e-10, atol=0)

    def test_edges(self):
        assert orlicz_Mg(0.0) == 0.0
        assert orlicz_Mg(math.inf) == math.inf
        np.testing.assert_array_equal(orlicz_Mg(np.array([0.0, 0.0])), [0.0, 0.0])
        with pytest.raises(ValueError):
            orlicz_Mg(-1.0)

    def test_linear_growth(self):
        assert abs((orlicz_Mg(101.0) - orlicz_Mg(100.0)) - SQRT_2_OVER_PI) < 1e-4

    def test_norm_single(self):
        r = orlicz_norm([1.0])
        np.testing.assert_allclose(orlicz_Mg(1.0 / r.value), 1.0, atol=1e-9)
        assert r.residual <= 1e-10

    def test_zero(self):
        assert orlicz_norm([0.0, 0.0]).value == 0.0

    @settings(max_examples=30, deadline=None)
    @given(weights.filter(lambda a: a.max() > 1e-3), st.floats(0.01, 100))
    def test_norm_root_and_homogeneity(self, a, c):
        r = orlicz_norm(a)
        np.testing.assert_allclose(np.sum(orlicz_Mg(a / r.value)), 1.0, atol=1e-8)
        np.testing.assert_allclose(orlicz_norm(c * a).value, c * r.value, rtol=1e-7)


class TestConcentration:
    def test_formula(self):
        assert concentration_tail([1.0], 2, 1.0) == pytest.approx(2 * math.exp(-0.5), rel=1e-15)
        assert concentration_tail([0.5, -2.0], 7, 2.0) == pytest.approx(2 * math.exp(-0.5), rel=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            concentration_tail([0.0], 2, 1.0)
        with pytest.raises(ValueError):
            concentration_tail([1.0], 2, 0.0)

    def test_lp_upper(self):
        np.testing.assert_allclose(expected_lp_upper([3.0, 4.0], 2), 5.0, rtol=1e-14)
        with pytest.raises(ValueError):
            expected_lp_upper([1.0], math.inf)
