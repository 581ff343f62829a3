#!/usr/bin/env python3
"""
Tests for the zero-intelligence order-book baseline
"""

import numpy as np
import pytest
from scipy import stats as sps

from hft_kinetics.core import ConfigError, RngStream
from hft_kinetics.microsim import ASK, BID
from hft_kinetics.stats import (LayerCounts, empirical_ccdf, exponential_curvature, ks_distance,
                                layered_analysis, moment_summary, profile_l1_shape)
from hft_kinetics.ziob import (BookState, mu_density_powerlaw, sample_depths, validate_ziob_config,
                               ziob_rates_for, ziob_run, ziob_steady_relations)


def _config(**overrides):
    raw = {'n_vol': 40, 'qfr': 0.2, 'n_events': 20_000, 'warmup_events': 5_000, 'seed': 11}
    raw.update(overrides)
    return validate_ziob_config(raw)


class TestRates:
    def test_density_normalized(self):
        grid = np.arange(0.0, 500.0, 0.5)
        density = mu_density_powerlaw(grid, mu_tot=3.0)
        assert density.sum() * 0.5 == pytest.approx(3.0)

    def test_density_tail_exponent(self):
        grid = np.arange(5000.0)
        density = mu_density_powerlaw(grid, exponent=2.9, r0=10.0)
        window = (grid >= 300) & (grid <= 3000)
        slope = np.polyfit(np.log(grid[window]), np.log(density[window]), 1)[0]
        assert -slope == pytest.approx(2.9, abs=0.05)

    def test_steady_relations(self):
        volume, qfr = ziob_steady_relations(1.0, 0.01, 0.05)
        assert volume == pytest.approx(95.0)
        assert qfr == pytest.approx(0.05)

    def test_rates_invert_relations(self):
        lam, omega = ziob_rates_for(100.0, 0.05)
        assert ziob_steady_relations(1.0, lam, omega) == pytest.approx((100.0, 0.05))

    def test_draining_rates_rejected(self):
        with pytest.raises(ConfigError):
            ziob_steady_relations(1.0, 0.1, 1.5)
        with pytest.raises(ConfigError):
            ziob_rates_for(100.0, 1.0)


class TestConfig:
    def test_targets(self):
        cfg = _config()
        assert cfg.steady == pytest.approx((40.0, 0.2))
        assert cfg.mu_tot == pytest.approx(1.0)
        assert cfg.mu_density.size == 2000

    def test_explicit_rates(self):
        cfg = validate_ziob_config({'lambda': 0.01, 'omega': 0.1, 'n_events': 10, 'seed': 1})
        assert cfg.steady == pytest.approx((90.0, 0.1))

    def test_rates_and_targets_exclusive(self):
        with pytest.raises(ConfigError) as exc:
            validate_ziob_config({'lambda': 0.01, 'omega': 0.1, 'qfr': 0.1, 'n_events': 10, 'seed': 1})
        assert exc.value.issues[0][0] == 'lambda'

    def test_unknown_and_missing_fields(self):
        with pytest.raises(ConfigError) as exc:
            validate_ziob_config({'n_vol': 10, 'qfr': 0.1, 'colour': 'red'})
        assert {name for name, _ in exc.value.issues} == {'n_events', 'seed', 'colour'}

    def test_depth_sampler(self):
        cfg = _config()
        depths = sample_depths(cfg, RngStream(2), 100_000)
        expected = cfg.mu_density[0] / cfg.mu_tot
        assert np.mean(depths == 0) == pytest.approx(expected, abs=0.005)


class TestBookState:
    def test_best_prices_and_midprice(self):
        book = BookState()
        book.add(BID, -2)
        book.add(BID, -1)
        book.add(ASK, 3)
        assert (book.best_bid(), book.best_ask()) == (-1, 3)
        assert book.midprice() == 1.0
        assert book.n_live == 3

    def test_execute_and_empty_side(self):
        book = BookState()
        book.add(ASK, 4)
        book.add(BID, 0)
        assert book.midprice() == 2.0
        assert book.execute_best(ASK) == 4
        assert book.execute_best(ASK) is None
        # the last defined midprice is kept while a side is empty
        assert book.midprice() == 2.0

    def test_cancel_slot(self):
        book = BookState()
        for price in (5, 6, 7):
            book.add(ASK, price)
        side, price = book.cancel_slot(0)
        assert (side, price) == (ASK, 5)
        assert book.best_ask() == 6
        prices, vols = book.levels(ASK)
        np.testing.assert_array_equal(prices, [6.0, 7.0])
        np.testing.assert_array_equal(vols, [1.0, 1.0])


class TestRun:
    def test_outputs(self):
        cfg = _config()
        result = ziob_run(cfg, RngStream(cfg.seed))
        assert len(result.ticks) > 100
        assert [t.tick for t in result.ticks] == sorted(t.tick for t in result.ticks)
        assert result.waits.size == cfg.n_events
        assert isinstance(result.book_events, LayerCounts)
        assert result.profiles['mid'].n_snapshots > 0

    def test_deterministic(self):
        cfg = _config(n_events=5_000)
        a = ziob_run(cfg, RngStream(1), book_events=None)
        b = ziob_run(cfg, RngStream(1), book_events=None)
        assert a.ticks == b.ticks

    def test_event_times_are_exponential(self):
        cfg = _config()
        result = ziob_run(cfg, RngStream(3), book_events=None)
        assert ks_distance(result.waits, sps.expon.cdf) < 0.02

    def test_flux_balance(self):
        cfg = _config(n_events=200_000, warmup_events=40_000)
        result = ziob_run(cfg, RngStream(4), book_events=None)
        assert result.measured_volume == pytest.approx(40.0, rel=0.1)

    def test_event_log(self):
        cfg = _config(n_events=3_000)
        result = ziob_run(cfg, RngStream(5), book_events='log')
        cols = result.book_events.columns()
        assert len(result.book_events) > 0
        assert np.all(cols['depth'] >= 0)
        assert set(np.unique(cols['side'])) <= {BID, ASK}

    def test_bad_sink_rejected(self):
        with pytest.raises(ValueError):
            ziob_run(_config(n_events=10), RngStream(6), book_events='table')

    def test_tick_sink(self):
        received = []
        cfg = _config(n_events=5_000)
        result = ziob_run(cfg, RngStream(7), tick_sink=received.extend)
        assert received == result.ticks


@pytest.mark.slow
def test_realistic_parameters_show_no_trend_signature():
    cfg = validate_ziob_config({'n_vol': 100, 'qfr': 0.05, 'n_events': 2_000_000, 'warmup_events': 200_000,
                                'seed': 9001})
    result = ziob_run(cfg, RngStream(cfg.seed))
    moves = np.array([t.dp for t in result.ticks])
    assert abs(moment_summary(moves)['excess_kurtosis']) < 0.3
    report = layered_analysis(result.book_events, result.ticks)
    assert np.max(np.abs(report.C_minus)) < 0.1
    assert np.max(np.abs(report.C_plus)) < 0.1


@pytest.mark.slow
def test_adjusted_parameters_improve_profile_but_bend_tail():
    runs = {}
    for name, qfr, seed in (('realistic', 0.05, 9001), ('adjusted', 0.75, 9002)):
        cfg = validate_ziob_config({'n_vol': 100, 'qfr': qfr, 'n_events': 2_000_000,
                                    'warmup_events': 200_000, 'seed': seed})
        runs[name] = ziob_run(cfg, RngStream(seed), book_events=None)
    realistic, _ = profile_l1_shape(runs['realistic'].profiles['mid'])
    adjusted, _ = profile_l1_shape(runs['adjusted'].profiles['mid'])
    assert adjusted * 2 <= realistic
    moves = np.abs([t.dp for t in runs['adjusted'].ticks])
    diag = exponential_curvature(empirical_ccdf(moves, exclude_max=True), x_min=float(np.median(moves)),
                                 min_probability=10.0 / moves.size)
    assert diag['curved']
