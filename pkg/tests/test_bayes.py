import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import lambertw as scipy_lambertw

from magcool.bayes import (GridDistribution, ImpossibleOutcomeError,
                           ThresholdTooHighError, effective_width,
                           gaussian_entropy_bits, gaussian_width_from_span,
                           kl_to_gaussian, lambert_w_m1, maybe_regrid, regrid,
                           shannon_entropy, thermal_prior, update_imperfect,
                           update_perfect)
from magcool.pulses import GaussianProfile, HardProfile


def gaussian_dist(mean=0.0, sigma=1.0, lo=-12, hi=12, n=4001):
    z = np.linspace(lo, hi, n)
    d = np.exp(-((z - mean) ** 2) / (2 * sigma**2))
    return GridDistribution(z, d).normalized()


class TestThermalPrior:
    def test_vacuum_variance(self):
        dist = thermal_prior(0.0)
        assert dist.variance() == pytest.approx(0.5, rel=1e-3)

    def test_variance_matches_occupation(self):
        dist = thermal_prior(100.0)
        assert dist.variance() == pytest.approx(100.5, rel=1e-3)

    def test_entropy_analytic(self):
        dist = thermal_prior(300.0)
        expected = gaussian_entropy_bits(math.sqrt(300.5))
        assert shannon_entropy(dist) == pytest.approx(expected, rel=1e-6)

    def test_rejects_narrow_grid(self):
        with pytest.raises(ValueError, match="narrow"):
            thermal_prior(100.0, grid=(-20, 20, 1000))

    def test_normalized(self):
        dist = thermal_prior(42.0)
        assert dist.mass() == pytest.approx(1.0, abs=1e-12)


class TestUpdatePerfect:
    def test_hard_pulse_is_uninformative(self):
        prior = gaussian_dist(sigma=2.0)
        post, p = update_perfect(prior, HardProfile(), 1)
        assert p == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(post.density, prior.density, rtol=0, atol=1e-15)

    def test_gaussian_product_closed_form(self):
        # N(0,1) prior with unit-width unit-peak profile at 0:
        # posterior is N(0, 1/2), outcome probability 1/sqrt(2)
        prior = gaussian_dist(sigma=1.0, lo=-10, hi=10, n=4001)
        post, p = update_perfect(prior, GaussianProfile(0.0, 1.0), 1)
        assert p == pytest.approx(1 / math.sqrt(2), abs=1e-8)
        expected = np.exp(-post.z**2) / math.sqrt(math.pi)
        np.testing.assert_allclose(post.density, expected, atol=1e-8)

    def test_outcome_probabilities_sum_to_one(self):
        rng = np.random.default_rng(0)
        prior = gaussian_dist(sigma=3.0)
        for _ in range(5):
            profile = GaussianProfile(rng.normal(0, 2), rng.uniform(0.5, 4))
            _, p_up = update_perfect(prior, profile, 1)
            _, p_dn = update_perfect(prior, profile, 0)
            assert p_up + p_dn == pytest.approx(1.0, abs=1e-12)

    def test_martingale_pointwise(self):
        rng = np.random.default_rng(1)
        prior = gaussian_dist(sigma=2.0)
        for _ in range(5):
            profile = GaussianProfile(rng.normal(0, 2), rng.uniform(0.5, 4))
            post_up, p_up = update_perfect(prior, profile, 1)
            post_dn, p_dn = update_perfect(prior, profile, 0)
            mix = p_up * post_up.density + p_dn * post_dn.density
            np.testing.assert_allclose(mix, prior.density, rtol=0, atol=1e-14)

    def test_impossible_outcome_raises(self):
        prior = gaussian_dist(sigma=0.5)
        profile = GaussianProfile(center=200.0, width=0.1)
        with pytest.raises(ImpossibleOutcomeError):
            update_perfect(prior, profile, 1)

    def test_posterior_stays_normalized_and_nonnegative(self):
        rng = np.random.default_rng(2)
        dist = gaussian_dist(sigma=4.0)
        for _ in range(10):
            profile = GaussianProfile(rng.normal(0, 3), rng.uniform(0.3, 5))
            dist, _ = update_perfect(dist, profile, int(rng.random() < 0.5))
            assert dist.mass() == pytest.approx(1.0, abs=1e-10)
            assert np.all(dist.density >= 0)


class TestUpdateImperfect:
    def test_perfect_limit_bit_exact(self):
        rng = np.random.default_rng(3)
        prior = gaussian_dist(sigma=2.0)
        for _ in range(5):
            profile = GaussianProfile(rng.normal(0, 2), rng.uniform(0.5, 4))
            for outcome in (0, 1):
                ref, p_ref = update_perfect(prior, profile, outcome)
                out, p_out = update_imperfect(prior, profile, outcome, 1.0)
                assert p_out == p_ref
                assert np.array_equal(out.density, ref.density)

    def test_coin_flip_limit_is_identity(self):
        rng = np.random.default_rng(4)
        prior = gaussian_dist(sigma=2.0)
        for _ in range(5):
            profile = GaussianProfile(rng.normal(0, 2), rng.uniform(0.5, 4))
            for outcome in (0, 1):
                out, p = update_imperfect(prior, profile, outcome, 0.5)
                assert p == pytest.approx(0.5, abs=1e-12)
                np.testing.assert_allclose(out.density, prior.density,
                                           rtol=0, atol=1e-12)

    def test_quadrature_oracle_f09(self):
        # independent quadrature of the mixed likelihood for f = 0.9
        prior = gaussian_dist(sigma=1.0, lo=-10, hi=10, n=8001)
        profile = GaussianProfile(0.0, 1.0)
        post, p = update_imperfect(prior, profile, 1, 0.9)

        def integrand(z):
            prior_pdf = math.exp(-z**2 / 2) / math.sqrt(2 * math.pi)
            up = math.exp(-z**2 / 2)
            return (0.9 * up + 0.1 * (1 - up)) * prior_pdf

        p_ref, _ = quad(integrand, -10, 10)
        assert p == pytest.approx(p_ref, abs=1e-8)
        z0 = 0.7
        post_ref = integrand(z0) / p_ref
        idx = np.argmin(np.abs(post.z - z0))
        assert post.density[idx] == pytest.approx(
            post_ref, abs=1e-5)  # z0 not exactly on grid

    def test_rejects_bad_fidelity(self):
        prior = gaussian_dist()
        with pytest.raises(ValueError):
            update_imperfect(prior, HardProfile(), 1, 0.4)


class TestEntropy:
    def test_gaussian_entropy(self):
        for sigma in (0.3, 1.0, 7.0):
            dist = gaussian_dist(sigma=sigma, lo=-12 * sigma, hi=12 * sigma)
            assert shannon_entropy(dist) == pytest.approx(
                gaussian_entropy_bits(sigma), rel=1e-8)

    def test_doubling_scale_adds_one_bit(self):
        dist = gaussian_dist(sigma=1.0)
        wide = GridDistribution(2 * dist.z, dist.density / 2)
        assert shannon_entropy(wide) - shannon_entropy(dist) == pytest.approx(
            1.0, abs=1e-9)

    def test_thermal_to_vacuum_difference(self):
        nbar = 500.0
        s_hot = shannon_entropy(thermal_prior(nbar))
        s_vac = gaussian_entropy_bits(math.sqrt(0.5))
        assert s_hot - s_vac == pytest.approx(
            0.5 * math.log2((nbar + 0.5) / 0.5), rel=1e-6)


class TestKL:
    def test_self_divergence_is_zero(self):
        dist = gaussian_dist(mean=1.0, sigma=2.0)
        # nonzero only through grid truncation and discretization
        assert kl_to_gaussian(dist, 1.0, 2.0) == pytest.approx(0.0, abs=1e-6)

    def test_closed_form(self):
        # D(N(0,1) || N(0, 4)) = ln 2 + 1/8 - 1/2
        dist = gaussian_dist(sigma=1.0)
        expected = math.log(2.0) + (1.0 + 0.0) / (2 * 4.0) - 0.5
        assert kl_to_gaussian(dist, 0.0, 2.0) == pytest.approx(expected, abs=1e-8)

    def test_nonnegative_random(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            z = np.linspace(-8, 8, 2001)
            d = rng.random(z.size) + 1e-3
            dist = GridDistribution(z, d).normalized()
            assert kl_to_gaussian(dist, rng.normal(), rng.uniform(0.5, 3)) > -1e-12

    def test_underflow_returns_inf(self):
        dist = gaussian_dist(mean=0.0, sigma=1.0, lo=-60, hi=60, n=4001)
        assert kl_to_gaussian(dist, 0.0, 0.01) == math.inf


class TestLambertW:
    def test_branch_point(self):
        assert lambert_w_m1(-1 / math.e) == pytest.approx(-1.0, abs=1e-7)

    def test_reference_value(self):
        assert lambert_w_m1(-0.1) == pytest.approx(-3.577152063957297, rel=1e-12)

    def test_defining_equation_random(self):
        rng = np.random.default_rng(6)
        x = -rng.uniform(1e-6, 1 / math.e - 1e-9, size=1000)
        w = lambert_w_m1(x)
        assert np.all(w <= -1.0 + 1e-12)
        residual = np.abs(w * np.exp(w) - x)
        assert np.all(residual < 1e-12 * np.abs(x))

    def test_against_scipy(self):
        x = -np.geomspace(1e-8, 1 / math.e - 1e-6, 50)
        ours = lambert_w_m1(x)
        ref = scipy_lambertw(x, k=-1).real
        np.testing.assert_allclose(ours, ref, rtol=1e-12)

    def test_domain_errors(self):
        for bad in (0.0, 0.1, -0.5):
            with pytest.raises(ValueError):
                lambert_w_m1(bad)


class TestEffectiveWidth:
    def test_one_sigma_threshold_recovers_sigma(self):
        sigma = 1.7
        dist = gaussian_dist(sigma=sigma, n=40001)
        peak = 1 / math.sqrt(2 * math.pi * sigma**2)
        est = effective_width(dist, peak * math.exp(-0.5))
        assert est.span / 2 == pytest.approx(sigma, rel=1e-4)
        assert est.width == pytest.approx(sigma, rel=1e-4)

    def test_forward_inverse_round_trip(self):
        sigma = 2.0
        span = 3 * sigma * 2  # crossings at +-3 sigma
        theta = (math.exp(-(span / 2) ** 2 / (2 * sigma**2))
                 / math.sqrt(2 * math.pi * sigma**2))
        assert gaussian_width_from_span(span, theta) == pytest.approx(
            sigma, rel=1e-9)

    def test_round_trip_across_scales(self):
        for sigma in np.geomspace(1e-3, 1e3, 25):
            span = 5.5 * sigma
            theta = (math.exp(-(span / 2) ** 2 / (2 * sigma**2))
                     / math.sqrt(2 * math.pi * sigma**2))
            rec = gaussian_width_from_span(span, theta)
            assert rec == pytest.approx(sigma, rel=1e-9)

    def test_side_peak_stretches_span(self):
        z = np.linspace(-20, 20, 8001)
        main = np.exp(-(z**2) / 2)
        side = 0.05 * np.exp(-((z - 8) ** 2) / 0.5)
        dist = GridDistribution(z, main + side).normalized()
        ref = GridDistribution(z, main).normalized()
        theta = 1e-3
        with_peak = effective_width(dist, theta)
        without = effective_width(ref, theta)
        assert with_peak.span > without.span + 4

    def test_threshold_too_high(self):
        dist = gaussian_dist()
        with pytest.raises(ThresholdTooHighError):
            effective_width(dist, 10.0)

    def test_mode_location(self):
        dist = gaussian_dist(mean=2.5, sigma=1.0)
        est = effective_width(dist, 0.05)
        assert est.mode == pytest.approx(2.5, abs=dist.spacing)


class TestRegrid:
    def test_mass_and_moments_preserved(self):
        dist = gaussian_dist(mean=0.7, sigma=1.3, lo=-15, hi=15, n=3001)
        out = regrid(dist, -10, 11, 4096)
        assert out.mass() == pytest.approx(1.0, abs=1e-8)
        ref_mean, ref_var = dist.mean(), dist.variance()
        out_n = out.normalized()
        assert out_n.mean() == pytest.approx(ref_mean, abs=1e-6 * max(1, abs(ref_mean)))
        assert out_n.variance() == pytest.approx(ref_var, rel=1e-6)

    def test_preservation_at_coarsest_trigger_resolution(self):
        # the re-mesh fires at 32 cells per width; moments must survive even
        # from that coarse a source grid
        sigma = 1.0
        n_src = int(16 * sigma * 32)  # spacing = sigma / 32 over +-8 sigma
        dist = gaussian_dist(mean=0.2, sigma=sigma, lo=-8, hi=8, n=n_src + 1)
        out = regrid(dist, 0.2 - 8 * sigma, 0.2 + 8 * sigma, 4096)
        assert out.mass() == pytest.approx(1.0, abs=1e-8)
        out_n = out.normalized()
        assert out_n.mean() == pytest.approx(dist.mean(), abs=1e-6)
        assert out_n.variance() == pytest.approx(dist.variance(), rel=1e-6)

    def test_maybe_regrid_triggers_on_narrow_width(self):
        dist = gaussian_dist(sigma=1.0, lo=-400, hi=400, n=4096)
        est = effective_width(dist, 0.01)
        out, did = maybe_regrid(dist, est)
        assert did
        assert out.z[0] == pytest.approx(est.mode - 8 * est.width)
        assert out.z[-1] == pytest.approx(est.mode + 8 * est.width)
        assert out.mass() == pytest.approx(1.0, abs=1e-10)

    def test_maybe_regrid_no_trigger_when_resolved(self):
        dist = gaussian_dist(sigma=1.0, lo=-8, hi=8, n=4096)
        est = effective_width(dist, 0.01)
        out, did = maybe_regrid(dist, est)
        assert not did
        assert out is dist


class TestSerialization:
    def test_csv_round_trip_exact(self):
        dist = gaussian_dist(sigma=1.3, n=201)
        again = GridDistribution.from_csv(dist.to_csv())
        np.testing.assert_array_equal(again.z, dist.z)
        np.testing.assert_array_equal(again.density, dist.density)

    def test_csv_header(self):
        dist = gaussian_dist(n=11)
        assert dist.to_csv().splitlines()[0] == "z,density"
        with pytest.raises(ValueError, match="header"):
            GridDistribution.from_csv("a,b\n1,2\n3,4\n")
