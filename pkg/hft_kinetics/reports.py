"""
Analyses run on finished experiments and the report files they produce

Each analysis reads the merged replica outputs of one recipe and adds
tables and scalar summary rows to a Report. emit_report writes every table
as a tab-separated file with one header line (column names carry units)
and the scalars to summary.tsv, with a fixed float format so equal inputs
give byte-identical files.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import stats as sps

from hft_kinetics.core import FitError, RngStream
from hft_kinetics.kinetics import (IntervalLaw, TentProfile, avg_orderbook_cdf, avg_orderbook_profile,
                                   avg_orderbook_profile_quad, hopping_barrier_mfpt,
                                   hopping_barrier_stationary, mean_transaction_interval,
                                   mean_transaction_interval_general, normalization_errors,
                                   powerlaw_mixture_ccdf, sample_powerlaw_mixture, spread_pdf)
from hft_kinetics.langevin import split_half_kappa
from hft_kinetics.records import FLOAT_FORMAT, SEPARATOR
from hft_kinetics.stats import (ccdf_at, empirical_ccdf, exponential_curvature, fit_exponential_decay,
                                fit_powerlaw_tail, fit_tanh_response, histogram_l1_distance,
                                ks_distance, layered_analysis_replicas, moment_summary,
                                profile_l1_distance, profile_l1_shape)

logger = logging.getLogger(__name__)


@dataclass
class RunBundle:
    family: str
    config: Any
    results: List[Any]
    reference: List[Any] = field(default_factory=list)

    def ticks(self, results: Optional[List[Any]] = None):
        out = []
        for res in (self.results if results is None else results):
            out.extend(rec for rec in res.ticks if not rec.warmup)
        return out

    def price_moves(self, results: Optional[List[Any]] = None) -> np.ndarray:
        if self.family == 'langevin':
            return np.concatenate(self.results)
        return np.array([rec.dp for rec in self.ticks(results)])

    def intervals(self, results: Optional[List[Any]] = None) -> np.ndarray:
        return np.array([rec.interval for rec in self.ticks(results)])

    def merged_profile(self, frame: str):
        hist = None
        for res in self.results:
            part = res.profiles.get(frame)
            if part is None:
                continue
            if hist is None:
                hist = type(part)(part.edges[0], part.edges[-1], part.bin_width, part.origin)
            hist.merge(part)
        if hist is None:
            raise FitError(f"no '{frame}' profile was recorded")
        return hist


class Report:
    def __init__(self):
        """
        Ordered tables and scalar summary rows
        """
        self.tables: Dict[str, pd.DataFrame] = {}
        self.summary: List[Dict[str, Any]] = []

    def add_table(self, name: str, frame: pd.DataFrame) -> None:
        self.tables[name] = frame

    def add_value(self, name: str, value: float, stderr: float = math.nan, units: str = '') -> None:
        self.summary.append({'name': name, 'value': float(value), 'stderr': float(stderr), 'units': units})

    def value(self, name: str) -> float:
        for row in self.summary:
            if row['name'] == name:
                return row['value']
        raise KeyError(name)


ANALYSES: Dict[str, Callable[[RunBundle, Dict[str, Any], Report], None]] = {}


def analysis(name: str):
    def register(func):
        ANALYSES[name] = func
        return func
    return register


def run_analyses(bundle: RunBundle, names, options: Optional[Dict[str, Dict[str, Any]]] = None) -> Report:
    report = Report()
    options = options or {}
    for name in names:
        logger.info("📊 analysis: %s", name)
        ANALYSES[name](bundle, dict(options.get(name) or {}), report)
    return report


def _optional_float(options: Dict[str, Any], name: str) -> Optional[float]:
    value = options.get(name)
    return None if value is None else float(value)


def emit_report(report: Report, directory: str) -> List[str]:
    """
    Write every table and summary.tsv into `directory`; returns the paths
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, frame in report.tables.items():
        path = os.path.join(directory, f"{name}.tsv")
        frame.to_csv(path, sep=SEPARATOR, index=False, float_format=FLOAT_FORMAT, na_rep='nan')
        paths.append(path)
    path = os.path.join(directory, 'summary.tsv')
    summary = pd.DataFrame(report.summary, columns=['name', 'value', 'stderr', 'units'])
    summary.to_csv(path, sep=SEPARATOR, index=False, float_format=FLOAT_FORMAT, na_rep='nan')
    paths.append(path)
    logger.info("✅ %d report files written to %s", len(paths), directory)
    return paths


def _predicted_kappa(bundle: RunBundle) -> Optional[float]:
    return getattr(bundle.config, 'kappa_predicted', None) if bundle.family in ('microsim', 'langevin') else None


@analysis('profile')
def profile_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    cm = bundle.merged_profile('cm')
    mid = bundle.merged_profile('mid')
    L_star = bundle.config.L_star
    theory = np.diff(avg_orderbook_cdf(cm.edges, L_star)) / cm.bin_width
    report.add_table('profile', pd.DataFrame({
        'r_tpip': cm.centers,
        'density_cm_per_tpip': cm.density,
        'stderr_cm_per_tpip': cm.stderr,
        'density_mid_per_tpip': mid.density,
        'stderr_mid_per_tpip': mid.stderr,
        'theory_per_tpip': theory,
    }))
    report.add_value('l1_cm_vs_theory', profile_l1_distance(cm, L_star))
    report.add_value('l1_mid_vs_theory', profile_l1_distance(mid, L_star))
    report.add_value('l1_cm_vs_mid', histogram_l1_distance(cm, mid))
    report.add_value('snapshots', cm.n_snapshots, units='count')


@analysis('intervals')
def interval_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    tau = bundle.intervals()
    if tau.size < 2:
        raise FitError("fewer than two transaction intervals recorded")
    tau_star = bundle.config.tau_star
    law = IntervalLaw(tau_star)
    grid = np.linspace(0.0, float(np.quantile(tau, 0.999)), int(options.get('points', 201)))
    report.add_table('interval_ccdf', pd.DataFrame({
        'tau_time': grid,
        'ccdf': ccdf_at(tau, grid),
        'theory_ccdf': law.ccdf(grid),
    }))
    report.add_value('mean_interval', tau.mean(), tau.std(ddof=1) / math.sqrt(tau.size), 'time')
    report.add_value('tau_star', mean_transaction_interval(bundle.config.N, bundle.config.sigma,
                                                           bundle.config.L_star), units='time')
    report.add_value('mean_interval_ratio', tau.mean() / tau_star)
    report.add_value('ks_interval_ccdf', ks_distance(tau, law.cdf))
    report.add_value('intervals', tau.size, units='count')


@analysis('price_tail')
def price_tail_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    x = np.abs(bundle.price_moves())
    if x.size < 10:
        raise FitError("too few price movements for a tail fit")
    kappa_pred = _predicted_kappa(bundle)
    default_min = 2.0 * kappa_pred if kappa_pred else float(np.median(x))
    x_min = float(options.get('x_min', default_min))
    x_max = _optional_float(options, 'x_max')
    min_probability = float(options.get('min_probability', 10.0 / x.size))

    curve = empirical_ccdf(x, exclude_max=True)
    fit = fit_exponential_decay(curve, x_min=x_min, x_max=x_max, min_probability=min_probability)
    grid = np.linspace(0.0, float(np.quantile(x, 1.0 - min_probability)), int(options.get('points', 201)))
    table = {'x_tpip': grid, 'ccdf': ccdf_at(x, grid), 'exponential_fit': np.exp(fit.intercept - grid / fit.kappa)}
    if kappa_pred:
        table['theory_tail'] = np.exp(-grid / kappa_pred)
    report.add_table('price_ccdf', pd.DataFrame(table))

    report.add_value('kappa', fit.kappa, fit.stderr, 'tpip')
    if kappa_pred:
        report.add_value('kappa_predicted', kappa_pred, units='tpip')
        report.add_value('kappa_ratio', fit.kappa / kappa_pred)
    try:
        curvature = exponential_curvature(curve, x_min=x_min, x_max=x_max, min_probability=min_probability)
        report.add_value('tail_curvature', curvature['relative_change'])
        report.add_value('tail_curved', float(curvature['curved']))
    except FitError as exc:
        logger.warning("⚠️ curvature diagnostic skipped: %s", exc)
    report.add_value('price_moves', x.size, units='count')


@analysis('moments')
def moment_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    summary = moment_summary(bundle.price_moves())
    report.add_value('dp_mean', summary['mean'], units='tpip')
    report.add_value('dp_std', summary['std'], units='tpip')
    report.add_value('dp_skewness', summary['skewness'])
    report.add_value('dp_excess_kurtosis', summary['excess_kurtosis'])


@analysis('layered')
def layered_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    runs = [(res.book_events, res.ticks) for res in bundle.results]
    if any(events is None for events, _ in runs):
        raise FitError("layered analysis needs recorded book events")
    layered = layered_analysis_replicas(runs, bin_width=float(options.get('bin_width', 1.0)),
                                        max_depth=float(options.get('max_depth', 60.0)))
    report.add_table('layered', pd.DataFrame({
        'r_tpip': layered.depths,
        'C_minus': layered.C_minus,
        'C_plus': layered.C_plus,
    }))
    report.add_value('gamma_c', layered.gamma_c, units='tpip')
    report.add_value('inner_corr', layered.inner_corr)
    report.add_value('inner_slope', layered.slope, units='tpip')
    report.add_value('max_abs_C', float(max(np.abs(layered.C_minus).max(), np.abs(layered.C_plus).max())))
    report.add_value('layered_ticks', layered.n_ticks, units='count')


@analysis('tanh_response')
def tanh_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    pairs = np.vstack([res.trend_pairs for res in bundle.results])
    fit = fit_tanh_response(pairs[:, 0], pairs[:, 1], bin_width=_optional_float(options, 'bin_width'),
                            n_bins=int(options.get('n_bins', 41)),
                            min_count=int(options.get('min_count', 100)),
                            dp_range=_optional_float(options, 'dp_range'))
    report.add_table('tanh_response', pd.DataFrame({
        'dp_prev_tpip': fit.centers,
        'mean_dz_tpip': fit.means,
        'std_dz_tpip': fit.stds,
        'count': fit.counts,
        'fitted_tpip': fit.c * np.tanh(fit.centers / fit.dp_star),
    }))
    mean_tau = bundle.intervals().mean()
    report.add_value('c_hat', fit.c, fit.c_stderr, 'tpip/tick')
    report.add_value('c_expected', bundle.config.c * mean_tau, units='tpip/tick')
    report.add_value('dp_star_hat', fit.dp_star, fit.dp_star_stderr, 'tpip')
    report.add_value('dp_star_config', bundle.config.dp_star, units='tpip')
    report.add_value('sigma_hat', fit.sigma, units='tpip')
    report.add_value('std_flatness', fit.std_flatness)


@analysis('equivalence')
def equivalence_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    if not bundle.reference:
        raise FitError("equivalence needs reference runs")
    ks_tau = ks_distance(bundle.intervals(), bundle.intervals(bundle.reference))
    ks_dp = ks_distance(np.abs(bundle.price_moves()), np.abs(bundle.price_moves(bundle.reference)))
    report.add_value('ks_interval_vs_reference', ks_tau)
    report.add_value('ks_abs_dp_vs_reference', ks_dp)


@analysis('stationarity')
def stationarity_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    kappa_pred = _predicted_kappa(bundle)
    x_min = float(options.get('x_min', 2.0 * kappa_pred if kappa_pred else 0.0))
    first, second = split_half_kappa(bundle.price_moves(), x_min,
                                     float(options.get('min_probability', 1e-3)))
    report.add_value('kappa_first_half', first, units='tpip')
    report.add_value('kappa_second_half', second, units='tpip')
    report.add_value('kappa_half_difference', abs(first - second) / (0.5 * (first + second)))


@analysis('profile_shape')
def profile_shape_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    hist = bundle.merged_profile('mid')
    l1, L_matched = profile_l1_shape(hist)
    report.add_table('profile', pd.DataFrame({
        'r_tpip': hist.centers,
        'density_mid_per_tpip': hist.density,
        'stderr_mid_per_tpip': hist.stderr,
        'theory_per_tpip': np.diff(avg_orderbook_cdf(hist.edges, L_matched)) / hist.bin_width,
    }))
    report.add_value('l1_shape_vs_theory', l1)
    report.add_value('L_star_matched', L_matched, units='tpip')


@analysis('flux_balance')
def flux_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    volume_steady, qfr_steady = bundle.config.steady
    volumes = np.array([res.measured_volume for res in bundle.results])
    qfrs = np.array([res.measured_qfr for res in bundle.results])
    report.add_value('volume_measured', volumes.mean(), units='orders')
    report.add_value('volume_steady', volume_steady, units='orders')
    report.add_value('volume_relative_error', abs(volumes.mean() / volume_steady - 1.0))
    report.add_value('qfr_measured', qfrs.mean())
    report.add_value('qfr_steady', qfr_steady)
    report.add_value('qfr_relative_error', abs(qfrs.mean() / qfr_steady - 1.0) if qfr_steady > 0 else math.nan)
    report.add_value('rejected_market_orders', sum(res.n_rejected for res in bundle.results), units='count')


@analysis('event_times')
def event_time_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    waits = np.concatenate([res.waits for res in bundle.results])
    report.add_value('ks_normalized_waits', ks_distance(waits, sps.expon.cdf))
    report.add_value('events', waits.size, units='count')


@analysis('oracle_suite')
def oracle_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    cfg = bundle.config
    L_star = cfg.get('L_star', 15.0)
    sigma = cfg.get('sigma', 1.0)
    N = cfg.get('N', 25)
    L = cfg.get('L', 4.0 * L_star)
    rng = RngStream(cfg.seed)

    r = np.linspace(0.5, 10.0 * L_star, int(cfg.get('profile_points', 100)))
    closed = avg_orderbook_profile(r, L_star)
    numeric = np.array([avg_orderbook_profile_quad(x, L_star) for x in r])
    report.add_table('oracle_profile', pd.DataFrame({'r_tpip': r, 'closed_form_per_tpip': closed,
                                                     'quadrature_per_tpip': numeric}))
    report.add_value('profile_max_abs_difference', np.max(np.abs(closed - numeric)), units='1/tpip')

    for name, error in normalization_errors(L_star, L).items():
        report.add_value(f'{name}_normalization_error', error)

    law = IntervalLaw(mean_transaction_interval(N, sigma, L_star))
    report.add_value('interval_mean_error', abs(law.mean_by_quadrature() - law.tau_star), units='time')
    general = mean_transaction_interval_general(N, sigma, lambda x: spread_pdf(x, L_star))
    report.add_value('tau_star_general_error', abs(general - law.tau_star), units='time')

    mfpt = hopping_barrier_mfpt(L, sigma, rng.child(1), n_samples=int(cfg.get('mfpt_samples', 100_000)))
    expected = L ** 2 / (4.0 * sigma ** 2)
    report.add_value('mfpt', mfpt, units='time')
    report.add_value('mfpt_relative_error', abs(mfpt / expected - 1.0))

    edges, density = hopping_barrier_stationary(L, sigma, rng.child(2),
                                                n_walkers=int(cfg.get('stationary_walkers', 4000)))
    widths = np.diff(edges)
    tent = np.diff(TentProfile(L).cdf(edges)) / widths
    report.add_table('hopping_stationary', pd.DataFrame({
        'r_tpip': 0.5 * (edges[:-1] + edges[1:]), 'density_per_tpip': density, 'tent_per_tpip': tent,
    }))
    report.add_value('stationary_tent_l1', float(np.sum(np.abs(density - tent) * widths)))


@analysis('powerlaw_superposition')
def powerlaw_report(bundle: RunBundle, options: Dict[str, Any], report: Report) -> None:
    cfg = bundle.config
    m = cfg.get('m', 3.5)
    kappa_min = cfg.get('kappa_min', 1.0)
    kappa_max = cfg.get('kappa_max', 1.0e4)
    x_min = cfg.get('x_min', 12.0)
    samples = sample_powerlaw_mixture(RngStream(cfg.seed), int(cfg.get('n_samples', 4_000_000)),
                                      m, kappa_min, kappa_max)
    fit = fit_powerlaw_tail(samples, x_min)
    grid = np.geomspace(x_min, fit.x_max, 40)
    report.add_table('powerlaw_ccdf', pd.DataFrame({
        'x_tpip': grid,
        'ccdf': ccdf_at(samples, grid),
        'theory_ccdf': powerlaw_mixture_ccdf(grid, m, kappa_min, kappa_max),
    }))
    report.add_value('tail_exponent', fit.exponent, fit.stderr)
    report.add_value('hill_exponent', fit.hill_exponent, fit.hill_stderr)
    report.add_value('mixture_m', m)
    report.add_value('tail_curvature', fit.relative_curvature)
    report.add_value('tail_samples', fit.n_tail, units='count')
