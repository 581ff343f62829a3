#!/usr/bin/env python3
"""
Tests for the estimators on synthetic data with known answers
"""

import math

import numpy as np
import pytest

from hft_kinetics.core import FitError, RngStream, TickRecord
from hft_kinetics.kinetics import avg_orderbook_cdf
from hft_kinetics.stats import (CCDFCurve, LayerCounts, ProfileHistogram, ccdf_at, empirical_ccdf,
                                exponential_curvature, fit_exponential_decay, fit_powerlaw_tail,
                                fit_tanh_response, hill_estimator, histogram_l1_distance, ks_distance,
                                layered_analysis, layered_analysis_replicas, moment_summary,
                                orderbook_histogram, profile_l1_distance, profile_l1_shape)


class TestEmpiricalCCDF:
    def test_small_sample(self):
        curve = empirical_ccdf([1, 2, 3])
        np.testing.assert_array_equal(curve.x, [1, 2, 3])
        np.testing.assert_allclose(curve.p, [1.0, 2 / 3, 1 / 3])

    def test_ties_collapse(self):
        curve = empirical_ccdf([4, 4, 4])
        assert len(curve) == 1
        assert curve.p[0] == 1.0

    def test_exclude_max(self):
        curve = empirical_ccdf([1, 2, 3, 4], exclude_max=True)
        np.testing.assert_array_equal(curve.x, [1, 2, 3])
        assert curve.n == 3

    def test_exponential_sample_matches_law(self):
        x = RngStream(1).generator.exponential(4.8, 100_000)
        assert ks_distance(x, lambda v: 1.0 - np.exp(-v / 4.8)) < 0.01

    def test_ccdf_at_grid(self):
        np.testing.assert_allclose(ccdf_at([1, 2, 3], [0.5, 2.0, 3.5]), [1.0, 2 / 3, 0.0])

    def test_empty_rejected(self):
        with pytest.raises(FitError):
            empirical_ccdf([])


class TestExponentialFit:
    def test_noiseless_curve(self):
        x = np.linspace(0.0, 30.0, 200)
        fit = fit_exponential_decay(CCDFCurve(x=x, p=np.exp(-x / 4.8), n=200))
        assert fit.kappa == pytest.approx(4.8, abs=1e-6)

    def test_synthetic_sample_within_error(self):
        x = RngStream(2).generator.exponential(3.0, 10_000)
        fit = fit_exponential_decay(empirical_ccdf(x, exclude_max=True), x_min=1.0, min_probability=1e-3)
        assert abs(fit.kappa - 3.0) < max(3 * fit.stderr, 0.15)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit_exponential_decay(empirical_ccdf([1.0, 2.0, 3.0]))

    def test_straight_tail_is_not_curved(self):
        x = np.linspace(1.0, 40.0, 300)
        diag = exponential_curvature(CCDFCurve(x=x, p=np.exp(-x / 5.0), n=300))
        assert not diag['curved']

    def test_gaussian_tail_is_curved(self):
        x = np.linspace(1.0, 4.0, 300)
        diag = exponential_curvature(CCDFCurve(x=x, p=np.exp(-x ** 2 / 2.0), n=300))
        assert diag['curved']


class TestPowerLawFit:
    def test_pareto_sample(self):
        u = RngStream(3).generator.random(100_000)
        x = (1.0 - u) ** (-1.0 / 3.5)
        fit = fit_powerlaw_tail(x, 1.0)
        assert fit.exponent == pytest.approx(3.5, abs=0.15)
        assert fit.hill_exponent == pytest.approx(3.5, abs=0.05)
        assert not fit.curved

    def test_exponential_sample_flagged(self):
        x = RngStream(4).generator.exponential(2.0, 100_000)
        fit = fit_powerlaw_tail(x, 1.0)
        assert fit.curved

    def test_hill_needs_tail(self):
        with pytest.raises(FitError):
            hill_estimator([0.1, 0.2], 1.0)

    def test_short_tail_rejected(self):
        with pytest.raises(FitError):
            fit_powerlaw_tail(np.arange(1.0, 50.0), 1.0)


class TestTanhFit:
    def test_noiseless_recovery(self):
        dp = np.linspace(-30.0, 30.0, 20_001)
        dz = 6.0 * np.tanh(dp / 7.5)
        fit = fit_tanh_response(dp, dz, dp_range=30.0, min_count=10)
        assert fit.c == pytest.approx(6.0, rel=0.01)
        assert fit.dp_star == pytest.approx(7.5, rel=0.01)

    def test_noisy_recovery_and_flat_variance(self):
        gen = RngStream(5).generator
        dp = gen.normal(0.0, 10.0, 400_000)
        dz = 2.0 * np.tanh(dp / 4.0) + gen.normal(0.0, 1.5, dp.size)
        fit = fit_tanh_response(dp, dz, dp_range=25.0)
        assert fit.c == pytest.approx(2.0, rel=0.05)
        assert fit.dp_star == pytest.approx(4.0, rel=0.1)
        assert fit.sigma == pytest.approx(1.5, rel=0.02)
        assert fit.std_flatness < 0.1

    def test_no_trend(self):
        gen = RngStream(6).generator
        dp = gen.normal(0.0, 5.0, 200_000)
        dz = gen.normal(0.0, 1.0, dp.size)
        fit = fit_tanh_response(dp, dz, dp_range=12.0)
        assert abs(fit.c) < 3 * fit.c_stderr

    def test_degenerate_binning(self):
        with pytest.raises(FitError):
            fit_tanh_response(np.zeros(1000), np.ones(1000))


class TestProfiles:
    def test_single_trader_delta(self):
        hist = orderbook_histogram([[5.2]] * 50, bin_width=1.0, lower=0.0, upper=10.0)
        assert hist.density[5] == pytest.approx(1.0)
        assert hist.density.sum() == pytest.approx(1.0)

    def test_outside_mass(self):
        hist = ProfileHistogram(0.0, 10.0, 1.0)
        hist.add_snapshots([[1.0, 20.0]])
        assert hist.outside_mass == pytest.approx(0.5)

    def test_theory_sample_has_small_distance(self):
        gen = RngStream(7).generator
        # ask offset = L/2 + tent(L) with L ~ gamma(4, L*)
        L = gen.gamma(4.0, 15.0, size=(50_000, 20))
        r = L / 2.0 + (L / 2.0) * (gen.random(L.shape) - gen.random(L.shape))
        hist = ProfileHistogram(-20.0, 400.0, 1.0)
        for chunk in np.array_split(r, 50):
            hist.add_snapshots(chunk)
        assert profile_l1_distance(hist, 15.0) < 0.02
        l1, matched = profile_l1_shape(hist)
        assert matched == pytest.approx(15.0, rel=0.02)
        assert l1 < 0.02

    def test_wrong_scale_is_far(self):
        r = np.full((10, 5), 100.0)
        hist = orderbook_histogram(r, bin_width=1.0, lower=-20.0, upper=150.0)
        assert profile_l1_distance(hist, 15.0) > 1.0

    def test_bin_averaged_theory_sums_to_cdf(self):
        edges = np.arange(0.0, 51.0)
        mass = np.diff(avg_orderbook_cdf(edges, 15.0))
        assert mass.sum() == pytest.approx(avg_orderbook_cdf(50.0, 15.0))

    def test_merge_and_stderr(self):
        first = orderbook_histogram(np.full((10, 3), 2.5), lower=0.0, upper=5.0)
        second = orderbook_histogram(np.full((10, 3), 3.5), lower=0.0, upper=5.0)
        assert histogram_l1_distance(first, second) == pytest.approx(2.0)
        first.merge(second)
        assert first.n_snapshots == 20
        assert np.all(np.isfinite(first.stderr))
        with pytest.raises(ValueError):
            first.merge(ProfileHistogram(0.0, 6.0))

    def test_levels_with_volumes(self):
        hist = ProfileHistogram(0.0, 4.0, 1.0, origin='mid')
        hist.add_levels([0.5, 2.5], [3, 1], repeat=2)
        np.testing.assert_allclose(hist.density, [0.75, 0.0, 0.25, 0.0])
        assert hist.n_snapshots == 2


def _layered_fixture(seed, n=4000, n_bins=20, inner=10, noise=2.0):
    gen = RngStream(seed).generator
    sub = gen.poisson(1.0, size=(n, 2, n_bins))
    canc = gen.poisson(1.0, size=(n, 2, n_bins))
    counts = LayerCounts(bin_width=1.0, max_depth=n_bins)
    idx = np.indices((n, 2, n_bins)).reshape(3, -1)
    for kind, draws in ((1, sub), (-1, canc)):
        reps = draws.ravel()
        ticks = np.repeat(idx[0], reps)
        sides = np.repeat(np.where(idx[1] == 0, -1, 1), reps)
        depths = np.repeat(idx[2] + 0.5, reps)
        zeros = np.zeros(ticks.size)
        counts.add(ticks, zeros, sides, np.full(ticks.size, kind), depths, zeros)
    net = sub - canc
    signal = (net[:, 0, :inner].sum(1) - net[:, 1, :inner].sum(1)
              - net[:, 0, inner:].sum(1) + net[:, 1, inner:].sum(1))
    dp = signal + gen.normal(0.0, noise, n)
    # events tagged k pair with the move of tick k+1
    ticks = [TickRecord(tick=k + 1, time=float(k + 1), interval=1.0, price=0.0, dp=float(dp[k]))
             for k in range(n)]
    return counts, ticks, dp


class TestLayered:
    def test_planted_structure(self):
        counts, ticks, _ = _layered_fixture(8)
        report = layered_analysis(counts, ticks, bin_width=1.0, max_depth=20.0)
        assert np.all(report.C_minus[:10] > 0) and np.all(report.C_minus[10:] < 0)
        assert np.all(report.C_plus[:10] < 0) and np.all(report.C_plus[10:] > 0)
        assert 9.5 <= report.gamma_c <= 10.5
        assert 0.6 < report.inner_corr < 0.78
        assert report.slope > 0

    def test_permuted_prices_decorrelate(self):
        counts, ticks, dp = _layered_fixture(9)
        shuffled = RngStream(10).generator.permutation(dp)
        ticks = [TickRecord(tick=t.tick, time=t.time, interval=1.0, price=0.0, dp=float(v))
                 for t, v in zip(ticks, shuffled)]
        report = layered_analysis(counts, ticks, bin_width=1.0, max_depth=20.0)
        bound = 4.5 / math.sqrt(len(ticks))
        assert np.max(np.abs(report.C_minus)) < bound
        assert np.max(np.abs(report.C_plus)) < bound

    def test_replicas_pool_rows(self):
        first = _layered_fixture(11, n=600)
        second = _layered_fixture(12, n=600)
        report = layered_analysis_replicas([first[:2], second[:2]], max_depth=20.0)
        assert report.n_ticks == 1200

    def test_too_few_ticks(self):
        counts, ticks, _ = _layered_fixture(13, n=200)
        with pytest.raises(FitError):
            layered_analysis(counts, ticks, max_depth=20.0)

    def test_warmup_ticks_dropped(self):
        counts, ticks, _ = _layered_fixture(14, n=1500)
        flagged = [TickRecord(tick=t.tick, time=t.time, interval=1.0, price=0.0, dp=t.dp, warmup=t.tick <= 200)
                   for t in ticks]
        assert layered_analysis(counts, flagged, max_depth=20.0).n_ticks == 1300


def test_moment_summary_gaussian():
    x = RngStream(15).generator.normal(0.0, 2.0, 200_000)
    summary = moment_summary(x)
    assert summary['std'] == pytest.approx(2.0, rel=0.01)
    assert abs(summary['skewness']) < 0.03
    assert abs(summary['excess_kurtosis']) < 0.06


def test_ks_two_samples():
    gen = RngStream(16).generator
    assert ks_distance(gen.normal(size=50_000), gen.normal(size=50_000)) < 0.02
    assert ks_distance(gen.normal(size=5_000), gen.normal(1.0, 1.0, 5_000)) > 0.3
