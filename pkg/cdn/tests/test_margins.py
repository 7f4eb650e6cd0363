"""Tests for margins and the standard normal kernels."""

import numpy as np
import pytest
from scipy import stats

from cdn.services.errors import DegenerateSample, OutOfSupport, OutOfUnitInterval, ParamOutOfDomain
from cdn.services.margins import (
    U_CLAMP, DiscreteMargin, NormalMargin, bivariate_normal_cdf, clamped_copula_coord, fit_mle,
    log_probit_chain_term, margin_from_dict, power_coord, probit_chain_term, std_normal_cdf,
    std_normal_quantile,
)


class TestStdNormalKernel:
    """Φ, Φ⁻¹ and the bivariate CDF."""

    def test_quantile_inverts_cdf(self):
        x = np.linspace(-6, 6, 25)
        np.testing.assert_allclose(std_normal_quantile(std_normal_cdf(x)), x, atol=1e-9)

    @pytest.mark.parametrize('h,k', [(0.0, 0.0), (-1.2, 0.7), (2.5, -0.4), (-3.0, -2.0)])
    def test_independent_bivariate_is_product(self, h, k):
        expected = std_normal_cdf(h) * std_normal_cdf(k)
        assert bivariate_normal_cdf(h, k, 0.0) == pytest.approx(expected, abs=1e-14)

    def test_origin_has_closed_form(self):
        """Φ₂(0, 0; ρ) = 1/4 + asin(ρ) / 2π."""
        for rho in (-0.95, -0.5, 0.3, 0.8, 0.99):
            expected = 0.25 + np.arcsin(rho) / (2 * np.pi)
            assert bivariate_normal_cdf(0.0, 0.0, rho) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize('rho', [-0.9, -0.3, 0.4, 0.95], ids=['neg-high', 'neg-low', 'pos-low', 'pos-high'])
    def test_reflection_identity(self, rho):
        """Φ₂(h, k; ρ) + Φ₂(h, -k; -ρ) = Φ(h)."""
        h = np.array([-1.5, 0.2, 1.1])
        k = np.array([0.3, -0.8, 2.0])
        total = bivariate_normal_cdf(h, k, rho) + bivariate_normal_cdf(h, -k, -rho)
        np.testing.assert_allclose(total, std_normal_cdf(h), atol=1e-12)

    def test_agrees_with_scipy(self):
        mvn = stats.multivariate_normal(mean=[0, 0], cov=[[1, 0.6], [0.6, 1]])
        for h, k in [(-0.5, 0.4), (1.0, 1.5), (-2.0, -1.0)]:
            assert bivariate_normal_cdf(h, k, 0.6) == pytest.approx(mvn.cdf([h, k]), abs=1e-5)

    def test_infinite_limits(self):
        assert bivariate_normal_cdf(np.inf, 0.3, 0.5) == pytest.approx(std_normal_cdf(0.3))
        assert bivariate_normal_cdf(-0.2, np.inf, 0.5) == pytest.approx(std_normal_cdf(-0.2))
        assert bivariate_normal_cdf(-np.inf, 0.3, 0.5) == 0.0

    def test_probit_chain_term(self):
        """dΦ⁻¹/dv = 1/φ(Φ⁻¹(v)); at v = 1/2 that is √(2π)."""
        assert probit_chain_term(0.5) == pytest.approx(np.sqrt(2 * np.pi))
        with pytest.raises(OutOfUnitInterval):
            log_probit_chain_term(1.0)


class TestNormalMargin:
    def test_rejects_bad_sigma(self):
        with pytest.raises(ParamOutOfDomain):
            NormalMargin(0.0, 0.0)

    def test_quantile_inverts_cdf(self):
        margin = NormalMargin(2.0, 3.0)
        x = np.array([-4.0, 2.0, 7.5])
        np.testing.assert_allclose(margin.quantile(margin.cdf(x)), x)

    def test_log_pdf_matches_scipy(self):
        margin = NormalMargin(-1.0, 0.5)
        x = np.linspace(-3, 1, 7)
        np.testing.assert_allclose(margin.log_pdf(x), stats.norm(-1.0, 0.5).logpdf(x))

    def test_dict_round_trip(self):
        margin = NormalMargin(0.25, 1.5)
        assert margin_from_dict(margin.to_dict()) == margin


class TestDiscreteMargin:
    def test_cdf_steps(self):
        margin = DiscreteMargin(1, [0.2, 0.3, 0.5])
        np.testing.assert_allclose(margin.cdf([0, 1, 2, 3, 4]), [0.0, 0.2, 0.5, 1.0, 1.0])

    def test_cdf_floors_non_integers(self):
        margin = DiscreteMargin(0, [0.5, 0.5])
        assert margin.cdf(0.7) == pytest.approx(0.5)

    def test_pmf_outside_support(self):
        margin = DiscreteMargin(0, [0.5, 0.5])
        with pytest.raises(OutOfSupport):
            margin.pmf_at(2)

    def test_rejects_non_probability_vector(self):
        with pytest.raises(ParamOutOfDomain):
            DiscreteMargin(0, [0.5, 0.6])

    def test_quantile(self):
        margin = DiscreteMargin(0, [0.2, 0.3, 0.5])
        np.testing.assert_array_equal(margin.quantile([0.1, 0.2, 0.45, 0.99]), [0, 0, 1, 2])


class TestFitMle:
    def test_mean_and_one_over_m_spread(self):
        margin = fit_mle([1.0, 2.0, 3.0, 4.0])
        assert margin.mu == pytest.approx(2.5)
        assert margin.sigma == pytest.approx(np.sqrt(1.25))

    def test_two_point_classes(self):
        margin = fit_mle([-1.0, 1.0])
        assert (margin.mu, margin.sigma) == (pytest.approx(0.0), pytest.approx(1.0))

    def test_location_scale_equivariance(self):
        x = np.array([0.3, -1.2, 2.5, 0.8, 0.1])
        base = fit_mle(x)
        moved = fit_mle(3.0 * x - 7.0)
        assert moved.mu == pytest.approx(3.0 * base.mu - 7.0)
        assert moved.sigma == pytest.approx(3.0 * base.sigma)

    @pytest.mark.parametrize('values', [[1.0], [2.0, 2.0, 2.0]], ids=['single', 'constant'])
    def test_degenerate(self, values):
        with pytest.raises(DegenerateSample):
            fit_mle(values)


class TestCopulaCoordinates:
    def test_clamped_into_open_interval(self):
        u = clamped_copula_coord(NormalMargin(), np.array([-50.0, 0.0, 50.0]))
        assert u[0] == U_CLAMP
        assert u[1] == pytest.approx(0.5)
        assert u[2] == 1.0 - U_CLAMP

    def test_infinity_is_exactly_one(self):
        assert clamped_copula_coord(NormalMargin(), np.inf) == 1.0

    def test_power_coord_keeps_marginalised_one(self):
        v = power_coord(np.array([1.0, 0.25, 1.0 - U_CLAMP]), 0.5)
        assert v[0] == 1.0
        assert v[1] == pytest.approx(0.5)
        assert v[2] < 1.0
