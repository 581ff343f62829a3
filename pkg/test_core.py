#!/usr/bin/env python3
"""
Tests for parameter validation, random streams and the spread sampler
"""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sps

from hft_kinetics.core import (ConfigError, ExperimentConfig, RngStream, SpreadDistribution, TraderState,
                               sample_spread, validate_config)
from hft_kinetics.kinetics import spread_pdf


def _fields(error):
    return [name for name, _ in error.issues]


class TestValidateConfig:
    def test_derived_quantities(self, small_params):
        params = dict(small_params, N=25, L_star=15, sigma=1, dz_star=3.6)
        cfg = validate_config(params)
        assert cfg.tau_star == pytest.approx(27.0)
        assert cfg.c == pytest.approx(3.6 / 27.0)
        assert cfg.kappa_predicted == pytest.approx(2.4)

    def test_defaults(self, small_config):
        cfg = small_config
        assert cfg.dt == pytest.approx(1e-2 * 10.0 ** 2 / 6)
        assert cfg.dt_can == pytest.approx(cfg.tau_star / 4)
        assert cfg.snapshot_interval == pytest.approx(cfg.tau_star / 4)

    def test_default_warmup_is_ten_n(self, small_params):
        params = dict(small_params)
        del params['warmup_transactions']
        assert validate_config(params).warmup_transactions == 60

    def test_single_trader_rejected(self, small_params):
        with pytest.raises(ConfigError) as exc:
            validate_config(dict(small_params, N=1))
        assert 'N' in _fields(exc.value)
        assert 'N<2' in str(exc.value)

    def test_negative_spread_scale_rejected(self, small_params):
        with pytest.raises(ConfigError) as exc:
            validate_config(dict(small_params, L_star=-1))
        assert _fields(exc.value) == ['L_star']

    def test_every_issue_reported(self, small_params):
        params = dict(small_params, sigma=0, dp_star='wide', bogus=1)
        del params['seed']
        with pytest.raises(ConfigError) as exc:
            validate_config(params)
        assert set(_fields(exc.value)) == {'seed', 'sigma', 'dp_star', 'bogus'}

    def test_dt_guard(self, small_params):
        with pytest.raises(ConfigError) as exc:
            validate_config(dict(small_params, dt=1.0))
        assert _fields(exc.value) == ['dt']
        relaxed = validate_config(dict(small_params, dt=1.0, strict_dt=False))
        assert relaxed.dt == 1.0

    def test_infinite_integer_field_rejected(self, small_params):
        with pytest.raises(ConfigError) as exc:
            validate_config(dict(small_params, N=float('inf'), n_transactions=float('nan')))
        assert set(_fields(exc.value)) == {'N', 'n_transactions'}

    def test_zero_trend_allowed(self, small_params):
        cfg = validate_config(dict(small_params, dz_star=0))
        assert cfg.c == 0.0

    def test_config_is_frozen(self, small_config):
        with pytest.raises(Exception):
            small_config.N = 10
        assert isinstance(small_config, ExperimentConfig)
        assert small_config.as_dict()['N'] == 6


class TestRngStream:
    def test_same_seed_same_draws(self):
        a = RngStream(99).generator.random(5)
        b = RngStream(99).generator.random(5)
        np.testing.assert_array_equal(a, b)

    def test_children_are_stateless_and_distinct(self):
        root = RngStream(99)
        first = root.child(1, 2).generator.random(4)
        root.generator.random(100)
        again = root.child(1, 2).generator.random(4)
        other = root.child(1, 3).generator.random(4)
        np.testing.assert_array_equal(first, again)
        assert not np.allclose(first, other)

    def test_replica_seeds_distinct_and_stable(self):
        seeds = [RngStream(5).replica_seed(k) for k in range(8)]
        assert len(set(seeds)) == 8
        assert seeds == [RngStream(5).replica_seed(k) for k in range(8)]
        assert all(0 <= s < 2 ** 64 for s in seeds)


class TestSpread:
    def test_moments(self):
        draws = sample_spread(RngStream(3), SpreadDistribution(15.0), size=1_000_000)
        assert draws.mean() == pytest.approx(60.0, abs=0.2)
        assert draws.var() == pytest.approx(900.0, rel=0.01)
        assert draws.min() > 0

    def test_skewness(self):
        draws = sample_spread(RngStream(5), SpreadDistribution(15.0), size=1_000_000)
        assert sps.skew(draws) == pytest.approx(1.0, abs=0.03)

    def test_ccdf_against_quadrature(self):
        draws = sample_spread(RngStream(4), SpreadDistribution(15.0), size=1_000_000)
        empirical = np.mean(draws >= 60.0)
        tail, _ = integrate.quad(lambda L: spread_pdf(L, 15.0), 60.0, np.inf)
        assert empirical == pytest.approx(tail, rel=0.01)

    def test_scalar_draw(self, rng):
        assert isinstance(sample_spread(rng, SpreadDistribution(2.0)), float)

    def test_distribution_moments(self):
        dist = SpreadDistribution(15.0)
        assert dist.mean == 60.0
        assert dist.variance == 900.0


def test_trader_quotes():
    trader = TraderState(id=0, z=100.0, L=30.0)
    assert trader.bid == 85.0
    assert trader.ask == 115.0
    assert math.isclose(trader.ask - trader.bid, trader.L)
