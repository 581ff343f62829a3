"""
Zero-intelligence order-book baseline

Unit-volume limit orders arrive at depths drawn from a rate density around
the market midprice, every live order is cancelled at rate lambda and
market orders arrive at rate omega. The three Poisson processes are
simulated exactly with next-event sampling.
"""

import heapq
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from hft_kinetics.core import ConfigError, ModelError, RngStream, TickRecord, check_positive, parse_number
from hft_kinetics.microsim import ASK, BID, CANCELLATION, SUBMISSION, BookEventLog
from hft_kinetics.stats import LayerCounts, ProfileHistogram

logger = logging.getLogger(__name__)

# Uniform draws per event: waiting time, event type, side, depth / target
_DRAWS = 4
_CHUNK = 1 << 14


def mu_density_powerlaw(r_mid, exponent: float = 2.9, r0: float = 10.0, mu_tot: float = 1.0):
    """
    Submission rate density proportional to (r0 + r)^-exponent on the given
    evenly spaced depth grid, normalized so that sum(density * dr) = mu_tot
    """
    grid = np.atleast_1d(np.asarray(r_mid, dtype=float))
    if np.any(grid < 0):
        raise ValueError("depths must be >= 0")
    dr = float(grid[1] - grid[0]) if grid.size > 1 else 1.0
    raw = (r0 + grid) ** -exponent
    return mu_tot * raw / (raw.sum() * dr)


def ziob_steady_relations(mu_tot: float, lambda_: float, omega: float) -> Tuple[float, float]:
    """
    Flux balance of the book: N_vol = (mu_tot - omega) / lambda, QFR = omega / mu_tot
    """
    if not mu_tot > omega:
        raise ConfigError([('omega', f"market-order rate {omega} drains the book (mu_tot={mu_tot})")])
    if not lambda_ > 0:
        raise ConfigError([('lambda', f"must be > 0, got {lambda_}")])
    return (mu_tot - omega) / lambda_, omega / mu_tot


def ziob_rates_for(n_vol: float, qfr: float, mu_tot: float = 1.0) -> Tuple[float, float]:
    """(lambda, omega) giving a target mean volume and quote fill ratio"""
    if not 0 <= qfr < 1:
        raise ConfigError([('qfr', f"must be in [0, 1), got {qfr}")])
    if not n_vol > 0:
        raise ConfigError([('n_vol', f"must be > 0, got {n_vol}")])
    omega = qfr * mu_tot
    return (mu_tot - omega) / n_vol, omega


@dataclass(frozen=True, eq=False)
class ZiobConfig:
    mu_density: np.ndarray = field(repr=False)
    lambda_: float
    omega: float
    n_events: int
    seed: int
    warmup_events: int = 0
    snapshot_interval: Optional[float] = None
    initial_volume: Optional[int] = None

    @property
    def mu_tot(self) -> float:
        return float(self.mu_density.sum())

    @property
    def steady(self) -> Tuple[float, float]:
        return ziob_steady_relations(self.mu_tot, self.lambda_, self.omega)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'mu_tot': self.mu_tot, 'depth_levels': int(self.mu_density.size), 'lambda': self.lambda_,
            'omega': self.omega, 'n_events': self.n_events, 'seed': self.seed,
            'warmup_events': self.warmup_events, 'snapshot_interval': self.snapshot_interval,
        }


def validate_ziob_config(raw: Mapping[str, Any]) -> ZiobConfig:
    """
    Rates come either as (lambda, omega) or as targets (n_vol, qfr); the
    submission density is the power law over depths 0..r_max-1
    """
    issues: List[Tuple[str, str]] = []
    raw = dict(raw or {})
    for name in ('n_events', 'seed'):
        if raw.get(name) is None:
            issues.append((name, "missing field"))

    by_rates = raw.get('lambda') is not None or raw.get('omega') is not None
    by_targets = raw.get('n_vol') is not None or raw.get('qfr') is not None
    if by_rates == by_targets:
        issues.append(('lambda', "give either lambda and omega or n_vol and qfr"))

    reals = check_positive(raw, ('mu_tot', 'mu_exponent', 'mu_r0', 'lambda', 'n_vol', 'snapshot_interval'),
                           issues)
    ints = check_positive(raw, ('n_events', 'mu_r_max', 'initial_volume'), issues, integer=True)

    fractions = {}
    for name in ('omega', 'qfr'):
        if raw.get(name) is not None:
            value = parse_number(raw, name, issues)
            if value is not None and value < 0:
                issues.append((name, f"must be >= 0, got {value}"))
            elif value is not None:
                fractions[name] = value

    seed = None
    if raw.get('seed') is not None:
        seed = parse_number(raw, 'seed', issues, integer=True)
        if seed is not None and not 0 <= seed < 2 ** 64:
            issues.append(('seed', f"must be a 64-bit unsigned integer, got {seed}"))
    warmup = 0
    if raw.get('warmup_events') is not None:
        warmup = parse_number(raw, 'warmup_events', issues, integer=True)
        if warmup is not None and warmup < 0:
            issues.append(('warmup_events', f"must be >= 0, got {warmup}"))

    known = {'mu_tot', 'mu_exponent', 'mu_r0', 'mu_r_max', 'lambda', 'omega', 'n_vol', 'qfr',
             'n_events', 'seed', 'warmup_events', 'snapshot_interval', 'initial_volume'}
    for name in sorted(set(raw) - known):
        issues.append((name, "unknown field"))
    if issues:
        raise ConfigError(issues)

    mu_tot = reals.get('mu_tot', 1.0)
    if by_rates:
        if 'lambda' not in reals or 'omega' not in fractions:
            raise ConfigError([('lambda', "lambda and omega must both be given")])
        lambda_, omega = reals['lambda'], fractions['omega']
    else:
        if 'n_vol' not in reals or 'qfr' not in fractions:
            raise ConfigError([('n_vol', "n_vol and qfr must both be given")])
        lambda_, omega = ziob_rates_for(reals['n_vol'], fractions['qfr'], mu_tot)
    ziob_steady_relations(mu_tot, lambda_, omega)

    grid = np.arange(int(ints.get('mu_r_max', 2000)), dtype=float)
    density = mu_density_powerlaw(grid, reals.get('mu_exponent', 2.9), reals.get('mu_r0', 10.0), mu_tot)
    return ZiobConfig(mu_density=density, lambda_=lambda_, omega=omega, n_events=int(ints['n_events']),
                      seed=int(seed), warmup_events=int(warmup),
                      snapshot_interval=reals.get('snapshot_interval'),
                      initial_volume=ints.get('initial_volume'))


class BookState:
    def __init__(self):
        """
        Integer volumes per price level on both sides, plus a slot array of
        live orders so a uniformly random live order can be cancelled
        """
        self.volume = {BID: defaultdict(int), ASK: defaultdict(int)}
        self._heaps = {BID: [], ASK: []}
        self._slots: List[Tuple[int, int]] = []
        self._level_slots: Dict[Tuple[int, int], set] = defaultdict(set)
        self.last_midprice = 0.0

    @property
    def n_live(self) -> int:
        return len(self._slots)

    def side_volume(self, side: int) -> int:
        return sum(self.volume[side].values())

    def _best(self, side: int) -> Optional[int]:
        heap = self._heaps[side]
        levels = self.volume[side]
        while heap:
            price = -heap[0] if side == BID else heap[0]
            if levels.get(price, 0) > 0:
                return price
            heapq.heappop(heap)
        return None

    def best_bid(self) -> Optional[int]:
        return self._best(BID)

    def best_ask(self) -> Optional[int]:
        return self._best(ASK)

    def midprice(self) -> float:
        """Market midprice; the last defined value while a side is empty"""
        bid, ask = self.best_bid(), self.best_ask()
        if bid is not None and ask is not None:
            self.last_midprice = 0.5 * (bid + ask)
        return self.last_midprice

    def add(self, side: int, price: int) -> None:
        levels = self.volume[side]
        if levels[price] == 0:
            heapq.heappush(self._heaps[side], -price if side == BID else price)
        levels[price] += 1
        self._level_slots[(side, price)].add(len(self._slots))
        self._slots.append((side, price))

    def _drop_slot(self, slot: int) -> Tuple[int, int]:
        side, price = self._slots[slot]
        self._level_slots[(side, price)].discard(slot)
        last = len(self._slots) - 1
        if slot != last:
            moved = self._slots[last]
            self._level_slots[moved].discard(last)
            self._level_slots[moved].add(slot)
            self._slots[slot] = moved
        self._slots.pop()
        levels = self.volume[side]
        levels[price] -= 1
        if levels[price] == 0:
            del levels[price]
        return side, price

    def cancel_slot(self, slot: int) -> Tuple[int, int]:
        return self._drop_slot(slot)

    def execute_best(self, side: int) -> Optional[int]:
        """Remove one order at the best price of `side`; None if it is empty"""
        price = self._best(side)
        if price is None:
            return None
        slot = next(iter(self._level_slots[(side, price)]))
        self._drop_slot(slot)
        return price

    def levels(self, side: int) -> Tuple[np.ndarray, np.ndarray]:
        items = sorted(self.volume[side].items())
        if not items:
            return np.empty(0), np.empty(0)
        prices, vols = zip(*items)
        return np.asarray(prices, dtype=float), np.asarray(vols, dtype=float)


@dataclass
class ZiobResult:
    config: ZiobConfig
    ticks: List[TickRecord]
    book_events: object
    profiles: Dict[str, ProfileHistogram]
    waits: np.ndarray
    measured_volume: float
    measured_qfr: float
    n_rejected: int
    elapsed: float

    def __iter__(self):
        yield self.ticks
        yield self.book_events
        yield list(self.profiles.values())

    @property
    def price_moves(self) -> np.ndarray:
        return np.array([rec.dp for rec in self.ticks])

    @property
    def intervals(self) -> np.ndarray:
        return np.array([rec.interval for rec in self.ticks])


def _fill_initial(book: BookState, cdf: np.ndarray, count: int, gen: np.random.Generator) -> None:
    depths = np.searchsorted(cdf, gen.random(count), side='right')
    sides = gen.random(count) < 0.5
    for depth, is_bid in zip(depths.tolist(), sides.tolist()):
        if is_bid:
            book.add(BID, -1 - depth)
        else:
            book.add(ASK, 1 + depth)


def ziob_run(config: ZiobConfig, rng: RngStream, book_events: Optional[str] = 'counts',
             profile_upper: float = 400.0, bin_width: float = 1.0, layer_max_depth: float = 80.0,
             tick_sink=None) -> ZiobResult:
    """
    Exact-time simulation of n_events events after warmup_events.

    book_events: None, 'log' (row log) or 'counts' (per-tick depth counts).
    """
    mu = config.mu_density
    mu_tot = config.mu_tot
    cdf = np.cumsum(mu) / mu_tot
    cdf[-1] = 1.0
    lam, omega = config.lambda_, config.omega
    steady_volume, steady_qfr = config.steady
    gen = rng.generator

    book = BookState()
    _fill_initial(book, cdf, int(config.initial_volume or round(steady_volume)), rng.child(1).generator)
    book.midprice()

    total_events = config.warmup_events + config.n_events
    interval = config.snapshot_interval or (1.0 / omega if omega > 0 else 10.0 / mu_tot)
    profile = ProfileHistogram(-bin_width, profile_upper, bin_width, origin='mid')
    if book_events == 'log':
        sink = BookEventLog()
    elif book_events == 'counts':
        sink = LayerCounts(bin_width=bin_width, max_depth=layer_max_depth)
    elif book_events is None:
        sink = None
    else:
        raise ValueError(f"book_events must be None, 'log' or 'counts', got {book_events!r}")
    columns: List[Tuple[int, float, int, int, float]] = []

    t = 0.0
    T = 0
    last_price = 0.0
    last_tick_time = 0.0
    ticks: List[TickRecord] = []
    pending: List[TickRecord] = []
    waits = np.empty(config.n_events)
    next_snapshot = None
    volume_area = 0.0
    measure_start = 0.0
    submitted = filled = rejected = 0

    def record_tick(price: float, measuring: bool) -> None:
        nonlocal T, last_price, last_tick_time
        T += 1
        if measuring:
            pending.append(TickRecord(tick=T, time=t, interval=t - last_tick_time, price=price,
                                      dp=price - last_price))
        last_price = price
        last_tick_time = t

    logger.info("🔄 ZI-OB run: %d events, mu_tot=%.4g, lambda=%.4g, omega=%.4g", total_events, mu_tot, lam, omega)
    event = 0
    while event < total_events:
        draws = gen.random((min(_CHUNK, total_events - event), _DRAWS)).tolist()
        for u_wait, u_kind, u_side, u_pick in draws:
            measuring = event >= config.warmup_events
            if measuring and next_snapshot is None:
                measure_start = t
                next_snapshot = t + interval
                if isinstance(sink, LayerCounts):
                    sink.first_tick = T
            n_live = book.n_live
            rate = mu_tot + lam * n_live + omega
            wait = -math.log1p(-u_wait) / rate
            t_new = t + wait

            if measuring:
                waits[event - config.warmup_events] = wait * rate
                volume_area += n_live * wait
                if t_new >= next_snapshot:
                    repeat = int((t_new - next_snapshot) // interval) + 1
                    mid = book.midprice()
                    prices, vols = book.levels(ASK)
                    profile.add_levels(prices - mid, vols, repeat)
                    next_snapshot += repeat * interval
            t = t_new

            x = u_kind * rate
            side = BID if u_side < 0.5 else ASK
            if x < mu_tot:
                mid = book.midprice()
                depth = int(np.searchsorted(cdf, u_pick, side='right'))
                price = math.floor(mid - depth) if side == BID else math.ceil(mid + depth)
                opposite = book.best_ask() if side == BID else book.best_bid()
                if measuring:
                    submitted += 1
                marketable = opposite is not None and (price >= opposite if side == BID else price <= opposite)
                if marketable:
                    book.execute_best(-side)
                    if measuring:
                        filled += 2
                    record_tick(float(opposite), measuring)
                else:
                    book.add(side, price)
                    if measuring and sink is not None:
                        columns.append((T, t, side, SUBMISSION, abs(mid - price)))
            elif x < mu_tot + lam * n_live:
                mid = book.midprice()
                slot = min(int(u_pick * n_live), n_live - 1)
                side, price = book.cancel_slot(slot)
                if measuring and sink is not None:
                    columns.append((T, t, side, CANCELLATION, abs(mid - price)))
            else:
                # a buy market order consumes the best ask
                price = book.execute_best(-side)
                if price is None:
                    rejected += 1
                else:
                    if measuring:
                        filled += 1
                    record_tick(float(price), measuring)

            if book.best_bid() is None and book.best_ask() is None:
                raise ModelError(f"order book drained at t={t:.6g} after {event} events")
            if sink is not None and len(columns) >= _CHUNK:
                _flush_events(sink, columns)
            if tick_sink is not None and len(pending) >= 4096:
                tick_sink(list(pending))
                ticks.extend(pending)
                pending.clear()
            event += 1

    if sink is not None:
        _flush_events(sink, columns)
    if tick_sink is not None and pending:
        tick_sink(pending)
    ticks.extend(pending)

    elapsed = t - measure_start
    measured_volume = volume_area / elapsed if elapsed > 0 else float(book.n_live)
    measured_qfr = filled / submitted if submitted else math.nan
    logger.info("✅ ZI-OB run finished: %d ticks, volume %.1f (steady %.1f), QFR %.3f (steady %.3f), %d rejected",
                len(ticks), measured_volume, steady_volume, measured_qfr, steady_qfr, rejected)
    return ZiobResult(config=config, ticks=ticks, book_events=sink, profiles={'mid': profile},
                      waits=waits, measured_volume=measured_volume, measured_qfr=measured_qfr,
                      n_rejected=rejected, elapsed=elapsed)


def _flush_events(sink, columns: List[Tuple[int, float, int, int, float]]) -> None:
    if not columns:
        return
    ticks, times, sides, kinds, depths = (np.asarray(col) for col in zip(*columns))
    sink.add(ticks, times, sides, kinds, depths, np.full(ticks.size, -1))
    columns.clear()


def sample_depths(config: ZiobConfig, rng: RngStream, size: int) -> np.ndarray:
    """Submission depths drawn from the configured rate density"""
    cdf = np.cumsum(config.mu_density) / config.mu_tot
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.generator.random(size), side='right').astype(float)
