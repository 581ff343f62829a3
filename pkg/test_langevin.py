#!/usr/bin/env python3
"""
Tests for the macroscopic Langevin iteration
"""

import numpy as np
import pytest
from scipy import stats as sps

from hft_kinetics.core import ConfigError, RngStream, validate_config
from hft_kinetics.kinetics import IntervalLaw
from hft_kinetics.langevin import (LangevinConfig, langevin_step, langevin_step_linear, run_langevin,
                                   split_half_kappa, validate_langevin_config)
from hft_kinetics.stats import empirical_ccdf, fit_exponential_decay, ks_distance, moment_summary


def _config(**overrides):
    raw = {'dz_star': 20.0, 'dp_star': 1.0, 'tau_star': 1.0, 'zeta_scale': 0.5, 'n_ticks': 400_000, 'seed': 3}
    raw.update(overrides)
    return validate_langevin_config(raw)


class TestStep:
    def test_fixed_point(self):
        assert langevin_step(0.0, 1.3, 0.0, _config()) == 0.0

    def test_no_trend_passes_noise(self):
        cfg = _config(dz_star=0.0)
        assert langevin_step(5.0, 2.0, 0.7, cfg) == 0.7

    def test_saturation(self):
        cfg = _config()
        assert langevin_step(1e3, 0.4, 0.0, cfg) == pytest.approx(cfg.c * 0.4)
        assert langevin_step(-1e3, 0.4, 0.0, cfg) == pytest.approx(-cfg.c * 0.4)

    def test_linear_form_for_small_trends(self):
        cfg = _config(dp_star=50.0)
        assert langevin_step_linear(0.5, 1.0, 0.1, cfg) == pytest.approx(langevin_step(0.5, 1.0, 0.1, cfg), rel=1e-4)


class TestConfig:
    def test_trend_from_dz_star(self):
        cfg = _config(dz_star=7.2, tau_star=2.0)
        assert cfg.c == pytest.approx(3.6)
        assert cfg.dz_star == pytest.approx(7.2)
        assert cfg.kappa_predicted == pytest.approx(4.8)

    def test_trend_given_directly(self):
        raw = {'c': 2.0, 'dp_star': 1.0, 'tau_star': 3.0, 'zeta_scale': 0.1, 'n_ticks': 10, 'seed': 1}
        assert validate_langevin_config(raw).dz_star == pytest.approx(6.0)

    def test_both_trend_forms_rejected(self):
        with pytest.raises(ConfigError) as exc:
            _config(c=1.0)
        assert 'c' in [name for name, _ in exc.value.issues]

    def test_issues_collected(self):
        with pytest.raises(ConfigError) as exc:
            validate_langevin_config({'dp_star': -1, 'n_ticks': 0})
        names = {name for name, _ in exc.value.issues}
        assert {'dp_star', 'n_ticks', 'tau_star', 'zeta_scale', 'seed', 'c'} <= names

    def test_from_experiment(self):
        micro = validate_config({'N': 25, 'L_star': 15, 'dp_star': 3.0, 'dz_star': 7.2, 'sigma': 1,
                                 'n_transactions': 10, 'seed': 4})
        cfg = LangevinConfig.from_experiment(micro, zeta_scale=0.5, n_ticks=100)
        assert cfg.tau_law == IntervalLaw(27.0)
        assert cfg.dz_star == pytest.approx(7.2)
        assert cfg.seed == 4


class TestRun:
    def test_length_and_determinism(self):
        cfg = _config(n_ticks=5000)
        a = run_langevin(cfg, RngStream(cfg.seed))
        b = run_langevin(cfg, RngStream(cfg.seed))
        assert a.size == 5000
        np.testing.assert_array_equal(a, b)

    def test_series_follows_step(self):
        cfg = _config(n_ticks=50, warmup=0)
        rng = RngStream(8)
        series = run_langevin(cfg, rng)
        tau = cfg.tau_law.sample(rng.child(1), 50)
        zeta = rng.child(2).generator.normal(0.0, cfg.zeta_scale, 50)
        dp = 0.0
        for k in range(50):
            dp = langevin_step(dp, tau[k], zeta[k], cfg)
            assert series[k] == pytest.approx(dp, rel=1e-12, abs=1e-12)

    def test_no_trend_gives_noise_law(self):
        cfg = _config(dz_star=0.0, n_ticks=100_000)
        dp = run_langevin(cfg, RngStream(5))
        assert ks_distance(dp, sps.norm(scale=0.5).cdf) < 0.02

    def test_symmetric(self):
        dp = run_langevin(_config(n_ticks=200_000), RngStream(6))
        assert abs(moment_summary(dp)['skewness']) < 0.05

    def test_exponential_tail(self):
        cfg = _config()
        dp = run_langevin(cfg, RngStream(7))
        fit = fit_exponential_decay(empirical_ccdf(np.abs(dp), exclude_max=True),
                                    x_min=2 * cfg.dz_star, min_probability=1e-3)
        assert fit.kappa == pytest.approx(cfg.kappa_predicted, rel=0.15)

    def test_stationary_halves(self):
        cfg = _config()
        dp = run_langevin(cfg, RngStream(8))
        first, second = split_half_kappa(dp, 2 * cfg.dz_star, 1e-3)
        assert first == pytest.approx(second, rel=0.1)


@pytest.mark.slow
def test_exponential_tail_with_strong_trend():
    cfg = validate_langevin_config({'dz_star': 7.2, 'dp_star': 3.0, 'tau_star': 1.0, 'zeta_scale': 0.5,
                                    'n_ticks': 1_000_000, 'seed': 8080})
    dp = run_langevin(cfg, RngStream(cfg.seed))
    fit = fit_exponential_decay(empirical_ccdf(np.abs(dp), exclude_max=True), x_min=2 * cfg.kappa_predicted,
                                min_probability=1e-4)
    assert fit.kappa == pytest.approx(4.8, rel=0.15)
