"""
Estimators applied to simulation output

CCDFs and their exponential / power-law fits, the binned trend-response
fit, order-book profile histograms and the layered order-book correlation
analysis. Everything here is a batch computation over arrays.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import optimize
from scipy import stats as sps

from hft_kinetics.core import FitError, TickRecord
from hft_kinetics.kinetics import avg_orderbook_cdf

logger = logging.getLogger(__name__)

# Relative slope change between the two halves of a fit range above which a
# straight-line fit is declared curved
CURVATURE_THRESHOLD = 0.3

# Fewer ticks than this give unstable layer coefficients
MIN_LAYER_TICKS = 1000


@dataclass
class CCDFCurve:
    x: np.ndarray
    p: np.ndarray
    n: int

    def __len__(self):
        return len(self.x)


def empirical_ccdf(samples, exclude_max: bool = False) -> CCDFCurve:
    """
    Right-continuous step CCDF P(>= x) at every distinct sample value,
    x ascending
    """
    values = np.sort(np.asarray(samples, dtype=float).ravel())
    if exclude_max and values.size:
        values = values[:-1]
    if values.size == 0:
        raise FitError("empirical_ccdf needs at least one sample")
    x, first = np.unique(values, return_index=True)
    n = values.size
    return CCDFCurve(x=x, p=(n - first) / n, n=n)


def ccdf_at(samples, x) -> np.ndarray:
    """P(>= x) of a sample evaluated on an arbitrary grid"""
    values = np.sort(np.asarray(samples, dtype=float).ravel())
    if values.size == 0:
        raise FitError("ccdf_at needs at least one sample")
    idx = np.searchsorted(values, np.asarray(x, dtype=float), side='left')
    return (values.size - idx) / values.size


@dataclass
class ExponentialFit:
    kappa: float
    stderr: float
    intercept: float
    n_points: int
    x_min: float
    x_max: float


def _fit_range(curve: CCDFCurve, x_min, x_max, min_probability):
    mask = curve.p > max(min_probability, 0.0)
    if x_min is not None:
        mask &= curve.x >= x_min
    if x_max is not None:
        mask &= curve.x <= x_max
    return curve.x[mask], curve.p[mask]


def fit_exponential_decay(curve: CCDFCurve, x_min: Optional[float] = None,
                          x_max: Optional[float] = None,
                          min_probability: float = 0.0) -> ExponentialFit:
    """
    Least squares of log P(>= x) against x; kappa = -1/slope
    """
    x, p = _fit_range(curve, x_min, x_max, min_probability)
    if x.size < 5:
        raise FitError(f"exponential fit needs >= 5 points in range, got {x.size}")
    reg = sps.linregress(x, np.log(p))
    if not reg.slope < 0:
        raise FitError(f"CCDF does not decay over the fit range (slope {reg.slope:.4g})")
    kappa = -1.0 / reg.slope
    return ExponentialFit(
        kappa=float(kappa),
        stderr=float(reg.stderr / reg.slope ** 2),
        intercept=float(reg.intercept),
        n_points=int(x.size),
        x_min=float(x[0]),
        x_max=float(x[-1]),
    )


def _half_slopes(x: np.ndarray, y: np.ndarray):
    half = x.size // 2
    full = sps.linregress(x, y).slope
    first = sps.linregress(x[:half + 1], y[:half + 1]).slope
    second = sps.linregress(x[half:], y[half:]).slope
    return full, first, second


def exponential_curvature(curve: CCDFCurve, x_min: Optional[float] = None,
                          x_max: Optional[float] = None,
                          min_probability: float = 0.0) -> Dict[str, float]:
    """
    Compare the log-linear slopes of the two halves of the fit range; an
    exponential tail gives equal slopes
    """
    x, p = _fit_range(curve, x_min, x_max, min_probability)
    if x.size < 10:
        raise FitError(f"curvature diagnostic needs >= 10 points, got {x.size}")
    full, first, second = _half_slopes(x, np.log(p))
    relative = abs(second - first) / abs(full) if full != 0 else math.inf
    return {
        'slope_first_half': float(first),
        'slope_second_half': float(second),
        'relative_change': float(relative),
        'curved': bool(relative > CURVATURE_THRESHOLD),
    }


@dataclass
class PowerLawFit:
    exponent: float
    stderr: float
    hill_exponent: float
    hill_stderr: float
    n_tail: int
    x_min: float
    x_max: float
    relative_curvature: float
    curved: bool


def fit_powerlaw_curve(curve: CCDFCurve, x_min: float, x_max: Optional[float] = None):
    """
    Log-log least squares of a CCDF curve; returns (exponent, stderr,
    relative curvature)
    """
    mask = (curve.x >= x_min) & (curve.p > 0)
    if x_max is not None:
        mask &= curve.x <= x_max
    x, p = curve.x[mask], curve.p[mask]
    if x.size < 5 or np.any(x <= 0):
        raise FitError(f"power-law fit needs >= 5 positive points in range, got {x.size}")
    lx, lp = np.log(x), np.log(p)
    reg = sps.linregress(lx, lp)
    _, first, second = _half_slopes(lx, lp)
    curvature = abs(second - first) / abs(reg.slope) if reg.slope != 0 else math.inf
    return float(-reg.slope), float(reg.stderr), float(curvature)


def hill_estimator(samples, x_min: float):
    """
    Maximum-likelihood Pareto exponent of the samples >= x_min and its
    asymptotic standard error
    """
    x = np.asarray(samples, dtype=float)
    tail = x[x >= x_min]
    if tail.size == 0:
        raise FitError(f"no samples above x_min={x_min}")
    total = np.log(tail / x_min).sum()
    if total <= 0:
        raise FitError("tail samples are all equal to x_min")
    alpha = tail.size / total
    return float(alpha), float(alpha / math.sqrt(tail.size))


def fit_powerlaw_tail(samples, x_min: float, min_tail: int = 500, n_grid: int = 40,
                      min_upper_count: int = 50) -> PowerLawFit:
    """
    Exponent of P(>= x) ~ x^-alpha above x_min.

    The CCDF is evaluated on a log-spaced grid from x_min up to the value
    with `min_upper_count` samples above it, and fitted by least squares in
    log-log coordinates. The Hill estimate is reported alongside, and the
    slope change between the two halves of the grid flags a wrong family.
    """
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    tail = np.sort(x[x >= x_min])
    if tail.size < min_tail:
        raise FitError(f"power-law tail needs >= {min_tail} samples above x_min, got {tail.size}")

    upper_index = max(tail.size - min_upper_count, 1)
    x_max = float(tail[upper_index])
    if x_max <= x_min:
        raise FitError("tail has no spread above x_min")
    grid = np.geomspace(x_min, x_max, n_grid)
    curve = CCDFCurve(x=grid, p=ccdf_at(tail, grid), n=tail.size)
    exponent, stderr, curvature = fit_powerlaw_curve(curve, x_min, x_max)
    hill, hill_stderr = hill_estimator(tail, x_min)
    return PowerLawFit(
        exponent=exponent,
        stderr=stderr,
        hill_exponent=hill,
        hill_stderr=hill_stderr,
        n_tail=int(tail.size),
        x_min=float(x_min),
        x_max=x_max,
        relative_curvature=curvature,
        curved=bool(curvature > CURVATURE_THRESHOLD),
    )


@dataclass
class TanhFit:
    c: float
    dp_star: float
    sigma: float
    c_stderr: float
    dp_star_stderr: float
    centers: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    counts: np.ndarray
    std_flatness: float


def _tanh_model(x, c, dp_star):
    return c * np.tanh(x / dp_star)


def fit_tanh_response(dp_prev, dz, bin_width: Optional[float] = None, n_bins: int = 41,
                      min_count: int = 100, dp_range: Optional[float] = None) -> TanhFit:
    """
    Binned conditional mean of dz against the previous price movement,
    fitted to c tanh(dp / dp*); samples with dz == 0 are inactive and dropped
    """
    dp_prev = np.asarray(dp_prev, dtype=float).ravel()
    dz = np.asarray(dz, dtype=float).ravel()
    if dp_prev.shape != dz.shape:
        raise FitError("dp_prev and dz must have the same length")
    active = dz != 0
    dp_prev, dz = dp_prev[active], dz[active]
    if dp_prev.size < min_count:
        raise FitError(f"only {dp_prev.size} active samples")

    half = dp_range or float(np.quantile(np.abs(dp_prev), 0.99))
    if not half > 0:
        raise FitError("degenerate binning: all previous price movements are zero")
    if bin_width is not None:
        n_bins = max(int(math.ceil(2 * half / bin_width)), 1)
        half = n_bins * bin_width / 2.0
    edges = np.linspace(-half, half, n_bins + 1)
    idx = np.searchsorted(edges, dp_prev, side='right') - 1
    inside = (idx >= 0) & (idx < n_bins)
    idx, values = idx[inside], dz[inside]

    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=values, minlength=n_bins)
    sumsq = np.bincount(idx, weights=values ** 2, minlength=n_bins)
    keep = counts >= min_count
    if keep.sum() < 3:
        raise FitError(f"degenerate binning: {int(keep.sum())} bins with >= {min_count} samples")

    n = counts[keep].astype(float)
    means = sums[keep] / n
    variances = np.maximum(sumsq[keep] / n - means ** 2, 0.0) * n / (n - 1)
    centers = 0.5 * (edges[:-1] + edges[1:])[keep]

    pooled = float(np.sum((n - 1) * variances) / np.sum(n - 1))
    sigma_hat = math.sqrt(pooled)
    stds = np.sqrt(variances)
    flatness = float(np.max(np.abs(stds / sigma_hat - 1.0))) if sigma_hat > 0 else 0.0

    sem = np.sqrt(variances / n)
    weights = sem if np.all(sem > 0) else None
    c0 = float(np.max(np.abs(means))) or 1.0
    p0 = (c0 if means[-1] >= means[0] else -c0, float(np.median(np.abs(dp_prev))) or half / 4)
    try:
        popt, pcov = optimize.curve_fit(
            _tanh_model, centers, means, p0=p0, sigma=weights, absolute_sigma=weights is not None,
            bounds=([-np.inf, 1e-9 * half], [np.inf, np.inf]), max_nfev=10000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"tanh response fit did not converge: {exc}") from exc

    c_hat, dp_star_hat = float(popt[0]), float(popt[1])
    perr = np.sqrt(np.diag(pcov)) if np.all(np.isfinite(pcov)) else np.array([np.nan, np.nan])
    c_err = float(perr[0])
    if not math.isfinite(c_err):
        # flat data leave dp* unidentified; c alone is a linear fit at fixed dp*
        t = np.tanh(centers / dp_star_hat)
        w = 1.0 / sem ** 2 if weights is not None else np.ones_like(t)
        c_err = float(1.0 / math.sqrt(np.sum(w * t ** 2))) if np.any(t != 0) else math.inf

    logger.debug("tanh fit: c=%.4g dp*=%.4g sigma=%.4g on %d bins", c_hat, dp_star_hat, sigma_hat, keep.sum())
    return TanhFit(
        c=c_hat, dp_star=dp_star_hat, sigma=sigma_hat, c_stderr=c_err,
        dp_star_stderr=float(perr[1]), centers=centers, means=means, stds=stds,
        counts=counts[keep], std_flatness=flatness,
    )


class ProfileHistogram:
    def __init__(self, lower: float = -20.0, upper: float = 150.0, bin_width: float = 1.0,
                 origin: str = 'cm'):
        """
        Accumulated order-book profile over snapshots; values outside
        [lower, upper) count towards the normalization but no bin
        """
        if bin_width <= 0 or upper <= lower:
            raise ValueError("need bin_width > 0 and upper > lower")
        self.bin_width = float(bin_width)
        self.origin = origin
        n_bins = int(round((upper - lower) / bin_width))
        self.edges = lower + self.bin_width * np.arange(n_bins + 1)
        self.counts = np.zeros(n_bins)
        self.sumsq = np.zeros(n_bins)
        self.n_snapshots = 0
        self.n_values = 0

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def add_snapshots(self, values) -> None:
        """
        values: one row per snapshot (a 1-d array is a single snapshot)
        """
        values = np.atleast_2d(np.asarray(values, dtype=float))
        n_snap, per_snap = values.shape
        if n_snap == 0:
            return
        idx = np.floor((values - self.edges[0]) / self.bin_width).astype(np.int64)
        inside = (idx >= 0) & (idx < self.n_bins)
        rows = np.broadcast_to(np.arange(n_snap)[:, None], idx.shape)
        flat = rows[inside] * self.n_bins + idx[inside]
        per = np.bincount(flat, minlength=n_snap * self.n_bins).reshape(n_snap, self.n_bins)
        self.counts += per.sum(axis=0)
        self.sumsq += (per.astype(float) ** 2).sum(axis=0)
        self.n_snapshots += n_snap
        self.n_values += n_snap * per_snap

    def add_levels(self, offsets, volumes, repeat: int = 1) -> None:
        """
        One snapshot given as price-level offsets with volumes, counted
        `repeat` times
        """
        offsets = np.asarray(offsets, dtype=float)
        volumes = np.asarray(volumes, dtype=float)
        idx = np.floor((offsets - self.edges[0]) / self.bin_width).astype(np.int64)
        inside = (idx >= 0) & (idx < self.n_bins)
        per = np.bincount(idx[inside], weights=volumes[inside], minlength=self.n_bins)
        self.counts += repeat * per
        self.sumsq += repeat * per ** 2
        self.n_snapshots += repeat
        self.n_values += int(repeat * volumes.sum())

    def merge(self, other: 'ProfileHistogram') -> None:
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different bins")
        self.counts += other.counts
        self.sumsq += other.sumsq
        self.n_snapshots += other.n_snapshots
        self.n_values += other.n_values

    @property
    def density(self) -> np.ndarray:
        if self.n_values == 0:
            return np.zeros(self.n_bins)
        return self.counts / (self.n_values * self.bin_width)

    @property
    def outside_mass(self) -> float:
        if self.n_values == 0:
            return 0.0
        return float(1.0 - self.counts.sum() / self.n_values)

    @property
    def stderr(self) -> np.ndarray:
        """Standard error of the per-snapshot density in each bin"""
        if self.n_snapshots < 2:
            return np.full(self.n_bins, np.nan)
        per_snap = self.n_values / self.n_snapshots
        scale = per_snap * self.bin_width
        mean = self.counts / self.n_snapshots
        var = np.maximum(self.sumsq / self.n_snapshots - mean ** 2, 0.0)
        var *= self.n_snapshots / (self.n_snapshots - 1)
        return np.sqrt(var / self.n_snapshots) / scale


def orderbook_histogram(snapshots, origin: str = 'cm', bin_width: float = 1.0,
                        lower: float = -20.0, upper: float = 150.0) -> ProfileHistogram:
    """
    Profile of best-ask offsets; each snapshot is an array of ask prices
    already measured from `origin`
    """
    snapshots = list(snapshots) if not isinstance(snapshots, np.ndarray) else snapshots
    if len(snapshots) == 0:
        raise FitError("orderbook_histogram needs at least one snapshot")
    hist = ProfileHistogram(lower, upper, bin_width, origin)
    if isinstance(snapshots, np.ndarray):
        hist.add_snapshots(snapshots)
    else:
        for snap in snapshots:
            hist.add_snapshots(np.asarray(snap, dtype=float)[None, :])
    return hist


def profile_l1_distance(hist: ProfileHistogram, L_star: float) -> float:
    """
    L1 distance between a normalized ask profile and the closed-form
    average profile, both averaged over the histogram bins; mass outside
    the binned range is compared as one extra cell
    """
    if hist.n_values == 0:
        raise FitError("empty profile histogram")
    theory_cdf = avg_orderbook_cdf(hist.edges, L_star)
    theory_mass = np.diff(theory_cdf)
    empirical_mass = hist.counts / hist.n_values
    theory_outside = 1.0 - theory_mass.sum()
    return float(np.abs(empirical_mass - theory_mass).sum() + abs(hist.outside_mass - theory_outside))


def profile_l1_shape(hist: ProfileHistogram):
    """
    L1 distance to the closed-form profile whose scale matches the
    histogram's mean offset (the closed form has mean 2 L*); returns
    (distance, matched L*)
    """
    if hist.counts.sum() == 0:
        raise FitError("empty profile histogram")
    mean = float((hist.centers * hist.counts).sum() / hist.counts.sum())
    if mean <= 0:
        raise FitError("profile has a non-positive mean offset")
    L_star = mean / 2.0
    return profile_l1_distance(hist, L_star), L_star


def histogram_l1_distance(first: ProfileHistogram, second: ProfileHistogram) -> float:
    if not np.array_equal(first.edges, second.edges):
        raise ValueError("histograms must share bins")
    if first.n_values == 0 or second.n_values == 0:
        raise FitError("empty profile histogram")
    diff = np.abs(first.counts / first.n_values - second.counts / second.n_values).sum()
    return float(diff + abs(first.outside_mass - second.outside_mass))


class LayerCounts:
    def __init__(self, bin_width: float = 1.0, max_depth: float = 80.0, first_tick: int = 0):
        """
        Book-event sink keeping only per-tick net counts
        N_r = submissions - cancellations per depth bin and side
        """
        self.bin_width = float(bin_width)
        self.n_bins = int(math.ceil(max_depth / bin_width))
        self.first_tick = int(first_tick)
        self._data = np.zeros((1024, 2, self.n_bins), dtype=np.int32)
        self.last_tick = self.first_tick - 1
        self.n_events = 0

    def _reserve(self, rows: int) -> None:
        if rows <= self._data.shape[0]:
            return
        size = self._data.shape[0]
        while size < rows:
            size *= 2
        grown = np.zeros((size, 2, self.n_bins), dtype=np.int32)
        grown[:self._data.shape[0]] = self._data
        self._data = grown

    def add(self, ticks, times, sides, kinds, depths, traders) -> None:
        """
        sides: -1 bid / +1 ask; kinds: +1 submission / -1 cancellation
        """
        ticks = np.asarray(ticks, dtype=np.int64)
        if ticks.size == 0:
            return
        bins = np.floor(np.asarray(depths, dtype=float) / self.bin_width).astype(np.int64)
        ok = (bins >= 0) & (bins < self.n_bins) & (ticks >= self.first_tick)
        if not ok.any():
            return
        rows = ticks[ok] - self.first_tick
        self._reserve(int(rows.max()) + 1)
        side_idx = (np.asarray(sides)[ok] > 0).astype(np.int64)
        np.add.at(self._data, (rows, side_idx, bins[ok]), np.asarray(kinds, dtype=np.int32)[ok])
        self.last_tick = max(self.last_tick, int(ticks[ok].max()))
        self.n_events += int(ok.sum())

    def matrices(self, ticks) -> tuple:
        """(N_minus, N_plus) rows for the requested ticks; absent ticks are zero"""
        ticks = np.asarray(ticks, dtype=np.int64)
        rows = ticks - self.first_tick
        valid = (rows >= 0) & (rows < self._data.shape[0])
        out = np.zeros((ticks.size, 2, self.n_bins), dtype=float)
        out[valid] = self._data[rows[valid]]
        return out[:, 0, :], out[:, 1, :]

    @property
    def depth_centers(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.bin_width


@dataclass
class LayeredReport:
    depths: np.ndarray
    C_minus: np.ndarray
    C_plus: np.ndarray
    gamma_c: float
    inner_corr: float
    slope: float
    n_ticks: int
    extra: Dict[str, float] = field(default_factory=dict)


def _columnwise_pearson(matrix: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pearson coefficient of every column with y; constant columns give 0"""
    xm = matrix - matrix.mean(axis=0)
    ym = y - y.mean()
    num = xm.T @ ym
    den = np.sqrt((xm ** 2).sum(axis=0) * (ym ** 2).sum())
    with np.errstate(divide='ignore', invalid='ignore'):
        corr = np.where(den > 0, num / den, 0.0)
    return np.clip(corr, -1.0, 1.0)


def crossover_depth(depths: np.ndarray, coefficients: np.ndarray) -> float:
    """
    Smallest depth where the coefficients go from positive to non-positive,
    linearly interpolated between bin centers; nan when there is none
    """
    for k in range(len(coefficients) - 1):
        c0, c1 = coefficients[k], coefficients[k + 1]
        if c0 > 0 >= c1:
            return float(depths[k] + (depths[k + 1] - depths[k]) * c0 / (c0 - c1))
    return math.nan


def layer_rows(book_events, tick_records: Sequence[TickRecord], bin_width: float = 1.0,
               max_depth: float = 60.0):
    """
    Per-tick net flow matrices paired with price movements.

    Events tagged with tick count k (recorded after tick k) are paired with
    the price movement of tick k+1. Returns (depths, N_minus, N_plus, dp).
    """
    if isinstance(book_events, LayerCounts):
        counts = book_events
    else:
        counts = book_events.to_layer_counts(bin_width=bin_width, max_depth=max_depth)
    records = [rec for rec in tick_records if not rec.warmup]
    ticks = np.array([rec.tick for rec in records], dtype=np.int64)
    dp = np.array([rec.dp for rec in records], dtype=float)
    n_minus, n_plus = counts.matrices(ticks - 1)
    n_keep = min(counts.n_bins, int(math.ceil(max_depth / counts.bin_width)))
    return counts.depth_centers[:n_keep], n_minus[:, :n_keep], n_plus[:, :n_keep], dp


def layered_from_rows(depths: np.ndarray, n_minus: np.ndarray, n_plus: np.ndarray,
                      dp: np.ndarray) -> LayeredReport:
    if dp.size < MIN_LAYER_TICKS:
        raise FitError(f"layered analysis needs >= {MIN_LAYER_TICKS} ticks, got {dp.size}")
    c_minus = _columnwise_pearson(n_minus, dp)
    c_plus = _columnwise_pearson(n_plus, dp)
    gamma_c = crossover_depth(depths, c_minus)

    inner_corr = slope = math.nan
    if math.isfinite(gamma_c):
        inner = depths < gamma_c
        n_inner = (n_minus[:, inner] - n_plus[:, inner]).sum(axis=1)
        if np.std(n_inner) > 0 and np.std(dp) > 0:
            inner_corr = float(sps.pearsonr(n_inner, dp)[0])
            slope = float(sps.linregress(n_inner, dp).slope)
    else:
        logger.info("⚠️ no positive-to-negative crossover in C_minus; inner correlation undefined")

    return LayeredReport(
        depths=depths, C_minus=c_minus, C_plus=c_plus, gamma_c=gamma_c,
        inner_corr=inner_corr, slope=slope, n_ticks=int(dp.size),
    )


def layered_analysis(book_events, tick_records: Sequence[TickRecord],
                     bin_width: float = 1.0, max_depth: float = 60.0) -> LayeredReport:
    """
    Correlate per-interval net order flow at each depth with the price
    movement that closes the interval
    """
    return layered_from_rows(*layer_rows(book_events, tick_records, bin_width, max_depth))


def layered_analysis_replicas(runs, bin_width: float = 1.0, max_depth: float = 60.0) -> LayeredReport:
    """
    Pool the (book_events, tick_records) pairs of independent runs before
    correlating; ticks are never paired across runs
    """
    parts = [layer_rows(events, records, bin_width, max_depth) for events, records in runs]
    if not parts:
        raise FitError("no runs to analyse")
    depths = parts[0][0]
    return layered_from_rows(
        depths,
        np.vstack([part[1] for part in parts]),
        np.vstack([part[2] for part in parts]),
        np.concatenate([part[3] for part in parts]),
    )


def ks_distance(samples, reference: Union[Callable, Iterable]) -> float:
    """
    Kolmogorov-Smirnov statistic against a CDF callable or a second sample
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise FitError("ks_distance needs samples")
    if callable(reference):
        return float(sps.kstest(samples, reference).statistic)
    other = np.asarray(list(reference) if not isinstance(reference, np.ndarray) else reference,
                       dtype=float).ravel()
    if other.size == 0:
        raise FitError("ks_distance needs a non-empty reference sample")
    return float(sps.ks_2samp(samples, other).statistic)


def moment_summary(samples) -> Dict[str, float]:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 4:
        raise FitError("moment_summary needs >= 4 samples")
    return {
        'n': int(x.size),
        'mean': float(x.mean()),
        'std': float(x.std(ddof=1)),
        'skewness': float(sps.skew(x)),
        'excess_kurtosis': float(sps.kurtosis(x, fisher=True)),
    }
