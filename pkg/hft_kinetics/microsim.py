"""
Monte Carlo engine of the trend-following trader model

N traders quote a bid and an ask separated by a fixed spread. Midprices
follow trend-following random walks; when one trader's bid reaches another
trader's ask the pair transacts at the bid and both requote by half their
spread. Two variants share one engine: continuous Itô steps and a
Poisson price-modification process.

Between transactions the drift is constant, so `advance` integrates a block
of steps at once and stops at the first step with a crossing. A block of K
steps and K single steps draw the same noise and give the same floats.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from hft_kinetics.core import (ExperimentConfig, ModelError, RngStream, TickRecord, TraderState,
                               sample_spread)
from hft_kinetics.stats import LayerCounts, ProfileHistogram

logger = logging.getLogger(__name__)

CONTINUOUS = 'continuous'
POISSON = 'poisson'
VARIANTS = (CONTINUOUS, POISSON)

# Substream keys under the run stream
_INIT_KEY = 2
_NOISE_KEY = 1

BID, ASK = -1, 1
SUBMISSION, CANCELLATION = 1, -1


@dataclass
class SimState:
    z: np.ndarray
    L: np.ndarray
    p: float = 0.0
    dp: float = 0.0
    t: float = 0.0
    T: int = 0
    last_transaction_time: float = 0.0
    step: int = 0

    @property
    def N(self) -> int:
        return self.z.size

    @property
    def traders(self) -> List[TraderState]:
        return [TraderState(i, float(z), float(L)) for i, (z, L) in enumerate(zip(self.z, self.L))]

    @property
    def bids(self) -> np.ndarray:
        return self.z - self.L / 2.0

    @property
    def asks(self) -> np.ndarray:
        return self.z + self.L / 2.0

    def market_midprice(self) -> float:
        return 0.5 * (float(self.bids.max()) + float(self.asks.min()))

    def copy(self) -> 'SimState':
        return SimState(self.z.copy(), self.L.copy(), self.p, self.dp, self.t, self.T,
                        self.last_transaction_time, self.step)


@dataclass(frozen=True)
class TransactionEvent:
    tick: int
    buyer: int
    seller: int
    price: float
    interval: float
    dp: float
    time: float

    def to_tick_record(self, warmup: bool = False) -> TickRecord:
        return TickRecord(tick=self.tick, time=self.time, interval=self.interval, price=self.price,
                          dp=self.dp, buyer=self.buyer, seller=self.seller, warmup=warmup)


@dataclass(frozen=True)
class BookEvent:
    time: float
    side: int
    kind: int
    depth: float
    trader: int
    tick: int


class BookEventLog:
    def __init__(self):
        """
        Columnar store of book events; each `add` call appends one chunk
        """
        self._chunks: List[Tuple[np.ndarray, ...]] = []
        self._size = 0

    def add(self, ticks, times, sides, kinds, depths, traders) -> None:
        n = len(ticks)
        if n == 0:
            return
        self._chunks.append(tuple(np.asarray(col) for col in (ticks, times, sides, kinds, depths, traders)))
        self._size += n

    def __len__(self) -> int:
        return self._size

    def columns(self) -> Dict[str, np.ndarray]:
        names = ('tick', 'time', 'side', 'kind', 'depth', 'trader')
        if not self._chunks:
            return {name: np.empty(0) for name in names}
        return {name: np.concatenate([chunk[k] for chunk in self._chunks]) for k, name in enumerate(names)}

    def __iter__(self) -> Iterator[BookEvent]:
        cols = self.columns()
        for k in range(self._size):
            yield BookEvent(time=float(cols['time'][k]), side=int(cols['side'][k]),
                            kind=int(cols['kind'][k]), depth=float(cols['depth'][k]),
                            trader=int(cols['trader'][k]), tick=int(cols['tick'][k]))

    def to_layer_counts(self, bin_width: float = 1.0, max_depth: float = 80.0) -> LayerCounts:
        cols = self.columns()
        first = int(cols['tick'].min()) if self._size else 0
        counts = LayerCounts(bin_width=bin_width, max_depth=max_depth, first_tick=first)
        counts.add(cols['tick'], cols['time'], cols['side'], cols['kind'], cols['depth'], cols['trader'])
        return counts


def drift(dp, config: ExperimentConfig):
    """c tanh(dp / dp*)"""
    return config.c * math.tanh(dp / config.dp_star)


def effective_dt(config: ExperimentConfig, variant: str = CONTINUOUS) -> float:
    """
    Integration step; the Poisson variant needs dt well below dt_can
    """
    if variant == POISSON:
        return min(config.dt, config.dt_can / 10.0)
    return config.dt


def init_state(config: ExperimentConfig, rng: RngStream) -> SimState:
    """
    Gamma spreads and midprices uniform on [-L*, L*]; trader i draws from its
    own substream so the initial book does not depend on N-ordering
    """
    z = np.empty(config.N)
    L = np.empty(config.N)
    dist = config.spread_distribution
    for i in range(config.N):
        sub = rng.child(_INIT_KEY, i)
        L[i] = sample_spread(sub, dist)
        z[i] = sub.generator.uniform(-config.L_star, config.L_star)
    return SimState(z=z, L=L)


class TraderNoise:
    def __init__(self, rng: RngStream, N: int, variant: str = CONTINUOUS, block: int = 512):
        """
        Per-trader noise streams served in (steps, N) blocks.

        Rows are handed out with `peek` and retired with `consume`, so rows
        looked at but not used are served again on the next call.
        """
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.block = int(block)
        self._generators = [rng.child(_NOISE_KEY, i).generator for i in range(N)]
        self._normals = np.empty((0, N))
        self._uniforms = np.empty((0, N)) if variant == POISSON else None
        self._pos = 0

    def _refill(self, rows: int) -> None:
        size = max(self.block, rows)
        normals = np.stack([gen.standard_normal(size) for gen in self._generators], axis=1)
        self._normals = np.concatenate([self._normals[self._pos:], normals])
        if self._uniforms is not None:
            uniforms = np.stack([gen.random(size) for gen in self._generators], axis=1)
            self._uniforms = np.concatenate([self._uniforms[self._pos:], uniforms])
        self._pos = 0

    def peek(self, rows: int):
        if self._pos + rows > self._normals.shape[0]:
            self._refill(rows)
        end = self._pos + rows
        uniforms = None if self._uniforms is None else self._uniforms[self._pos:end]
        return self._normals[self._pos:end], uniforms

    def consume(self, rows: int) -> None:
        self._pos += rows


def trader_noise(rng: RngStream, N: int, variant: str = CONTINUOUS) -> TraderNoise:
    return TraderNoise(rng, N, variant)


def _increments(state: SimState, config: ExperimentConfig, variant: str, dt: float,
                normals: np.ndarray, uniforms: Optional[np.ndarray]):
    """Displacements of one block and the mask of traders that moved"""
    trend = drift(state.dp, config)
    if variant == CONTINUOUS:
        inc = trend * dt + config.sigma * math.sqrt(dt) * normals
        return inc, None
    moved = uniforms < dt / config.dt_can
    jump = trend * config.dt_can + config.sigma * math.sqrt(config.dt_can) * normals
    return np.where(moved, jump, 0.0), moved


def match_and_settle(state: SimState, previous_z: Optional[np.ndarray] = None) -> List[TransactionEvent]:
    """
    Settle every crossing of the current state.

    Candidate pairs are taken in ascending order of the linear-interpolation
    estimate of when their gap closed during the last step, using
    `previous_z` as the pre-step midprices (without it, deepest overlap
    first); ties go to the deeper overlap, then to the lower (buyer, seller).
    The scan repeats after each settlement.
    """
    z = state.z
    half = state.L / 2.0
    prev = z.copy() if previous_z is None else np.array(previous_z, dtype=float)
    limit = max(1, state.N * (state.N - 1) // 2)
    events: List[TransactionEvent] = []

    while True:
        b = z - half
        a = z + half
        ask_min = a.min()
        bid_max = b.max()
        if bid_max < ask_min:
            break
        if len(events) >= limit:
            raise ModelError(f"settlement did not terminate after {limit} transactions at t={state.t}")

        bidders = np.flatnonzero(b >= ask_min)
        askers = np.flatnonzero(a <= bid_max)
        overlap = (b[bidders][:, None] >= a[askers][None, :]) & (bidders[:, None] != askers[None, :])
        ii, jj = np.nonzero(overlap)
        buyers, sellers = bidders[ii], askers[jj]
        gap_now = a[sellers] - b[buyers]
        gap_before = (prev[sellers] + half[sellers]) - (prev[buyers] - half[buyers])
        closing = gap_before - gap_now
        with np.errstate(divide='ignore', invalid='ignore'):
            frac = np.where((gap_before > 0) & (closing > 0), gap_before / closing, 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        first = np.lexsort((sellers, buyers, gap_now, frac))[0]
        i, j = int(buyers[first]), int(sellers[first])

        price = float(b[i])
        dp = price - state.p
        z[i] -= half[i]
        z[j] += half[j]
        prev[i] -= half[i]
        prev[j] += half[j]
        state.T += 1
        interval = state.t - state.last_transaction_time
        state.last_transaction_time = state.t
        state.p = price
        state.dp = dp
        events.append(TransactionEvent(tick=state.T, buyer=i, seller=j, price=price,
                                       interval=interval, dp=dp, time=state.t))
    return events


def decompose_cm(state: SimState):
    """(z_cm, relative midprices r_i = z_i - z_cm)"""
    z_cm = float(state.z.mean())
    return z_cm, state.z - z_cm


def advance(state: SimState, config: ExperimentConfig, noise: TraderNoise, variant: str,
            max_steps: int, observer: Optional['RunObserver'] = None,
            dt: Optional[float] = None) -> List[TransactionEvent]:
    """
    Integrate up to `max_steps` steps, stopping after the first step that
    produced a crossing; that step's crossings are settled before return
    """
    dt = effective_dt(config, variant) if dt is None else dt
    normals, uniforms = noise.peek(max_steps)
    inc, moved = _increments(state, config, variant, dt, normals, uniforms)
    path = np.cumsum(np.vstack([state.z[None, :], inc]), axis=0)[1:]

    half = state.L / 2.0
    crossed = (path - half).max(axis=1) >= (path + half).min(axis=1)
    hits = np.flatnonzero(crossed)
    rows = int(hits[0]) + 1 if hits.size else max_steps
    noise.consume(rows)

    start_z = state.z
    first_step = state.step
    previous = path[rows - 2] if rows >= 2 else start_z
    state.z = path[rows - 1].copy()
    state.step += rows
    state.t = state.step * dt

    if observer is not None:
        observer.on_path(state, start_z, path[:rows], None if moved is None else moved[:rows],
                         first_step, dt, crossed=bool(hits.size))
    if not hits.size:
        return []

    pre_settle = state.z.copy()
    dp_before = state.dp
    events = match_and_settle(state, previous)
    if observer is not None:
        observer.on_settlement(state, pre_settle, events, dp_before)
    return events


def step_continuous(state: SimState, config: ExperimentConfig, noise: TraderNoise):
    """One Itô step followed by settlement; returns (state, events)"""
    events = advance(state, config, noise, CONTINUOUS, 1)
    return state, events


def step_poisson(state: SimState, config: ExperimentConfig, noise: TraderNoise):
    """One step in which each trader requotes with probability dt/dt_can"""
    events = advance(state, config, noise, POISSON, 1)
    return state, events


@dataclass
class Probes:
    ticks: bool = True
    snapshots: bool = False
    snapshot_interval: Optional[float] = None
    profile_lower: float = -20.0
    profile_upper: float = 150.0
    bin_width: float = 1.0
    book_events: Optional[str] = None
    layer_max_depth: float = 80.0
    trend_pairs: bool = False
    trajectory: bool = False
    warmup_ticks: bool = False

    def __post_init__(self):
        if self.book_events not in (None, 'log', 'counts'):
            raise ValueError(f"book_events must be None, 'log' or 'counts', got {self.book_events!r}")

    @classmethod
    def from_names(cls, names, **options) -> 'Probes':
        """
        Build from recipe probe names: ticks, snapshots, book_events,
        layer_counts, trend_pairs, trajectory
        """
        names = set(names or ())
        unknown = names - {'ticks', 'snapshots', 'book_events', 'layer_counts', 'trend_pairs', 'trajectory'}
        if unknown:
            raise ValueError(f"unknown probes: {sorted(unknown)}")
        book = 'counts' if 'layer_counts' in names else ('log' if 'book_events' in names else None)
        return cls(ticks=True, snapshots='snapshots' in names, book_events=book,
                   trend_pairs='trend_pairs' in names, trajectory='trajectory' in names, **options)


class RunObserver:
    def __init__(self, config: ExperimentConfig, probes: Probes, dt: float,
                 tick_sink: Optional[Callable[[List[TickRecord]], None]] = None):
        """
        Collects every probe output of one run; nothing is recorded while
        the tick count is inside the warmup
        """
        self.config = config
        self.probes = probes
        self.tick_sink = tick_sink
        self.warmup = config.warmup_transactions
        self.last_tick = config.warmup_transactions + config.n_transactions
        self.measure_start: Optional[float] = 0.0 if self.warmup == 0 else None
        self.ticks: List[TickRecord] = []
        self._pending: List[TickRecord] = []

        interval = probes.snapshot_interval or config.snapshot_interval
        self.snapshot_every = max(int(round(interval / dt)), 1)
        self.profiles: Dict[str, ProfileHistogram] = {}
        if probes.snapshots:
            for frame in ('cm', 'mid'):
                self.profiles[frame] = ProfileHistogram(probes.profile_lower, probes.profile_upper,
                                                        probes.bin_width, origin=frame)
        if probes.book_events == 'log':
            self.book = BookEventLog()
        elif probes.book_events == 'counts':
            self.book = LayerCounts(bin_width=probes.bin_width, max_depth=probes.layer_max_depth,
                                    first_tick=self.warmup)
        else:
            self.book = None
        self._trend: List[np.ndarray] = []
        self._last_post_z: Optional[np.ndarray] = None
        self._traj: List[np.ndarray] = []

    def measuring(self, state: SimState) -> bool:
        return state.T >= self.warmup

    def on_path(self, state: SimState, start_z: np.ndarray, rows: np.ndarray,
                moved: Optional[np.ndarray], first_step: int, dt: float, crossed: bool) -> None:
        if not self.measuring(state):
            return
        half = state.L / 2.0
        steps = first_step + 1 + np.arange(rows.shape[0])

        if self.profiles or self.probes.trajectory:
            # the crossing row is captured after settlement instead
            usable = rows[:-1] if crossed else rows
            take = np.flatnonzero(steps[:usable.shape[0]] % self.snapshot_every == 0)
            if take.size:
                self._snapshot(usable[take], half, steps[take] * dt)

        if self.book is not None:
            self._requotes(state, start_z, rows, moved, steps * dt, half)

    def _snapshot(self, rows: np.ndarray, half: np.ndarray, times: np.ndarray) -> None:
        asks = rows + half
        z_cm = rows.mean(axis=1)
        z_mid = 0.5 * ((rows - half).max(axis=1) + asks.min(axis=1))
        if self.profiles:
            self.profiles['cm'].add_snapshots(asks - z_cm[:, None])
            self.profiles['mid'].add_snapshots(asks - z_mid[:, None])
        if self.probes.trajectory:
            self._traj.append(np.column_stack([times, z_cm, z_mid]))

    def _requotes(self, state: SimState, start_z: np.ndarray, rows: np.ndarray,
                  moved: Optional[np.ndarray], times: np.ndarray, half: np.ndarray) -> None:
        before = np.vstack([start_z[None, :], rows[:-1]])
        mid_before = 0.5 * ((before - half).max(axis=1) + (before + half).min(axis=1))
        mid_after = 0.5 * ((rows - half).max(axis=1) + (rows + half).min(axis=1))
        if moved is None:
            moved = np.ones(rows.shape, dtype=bool)
        k, i = np.nonzero(moved)
        if k.size == 0:
            return
        old_bid = mid_before[k] - (before[k, i] - half[i])
        old_ask = (before[k, i] + half[i]) - mid_before[k]
        new_bid = mid_after[k] - (rows[k, i] - half[i])
        new_ask = (rows[k, i] + half[i]) - mid_after[k]
        n = k.size
        self._emit(
            np.full(4 * n, state.T, dtype=np.int64),
            np.tile(times[k], 4),
            np.repeat([BID, ASK, BID, ASK], n),
            np.repeat([CANCELLATION, CANCELLATION, SUBMISSION, SUBMISSION], n),
            np.concatenate([old_bid, old_ask, new_bid, new_ask]),
            np.tile(i, 4),
        )

    def _emit(self, ticks, times, sides, kinds, depths, traders) -> None:
        self.book.add(ticks, times, sides, kinds, depths, traders)

    def on_settlement(self, state: SimState, pre_z: np.ndarray, events: List[TransactionEvent],
                      dp_before: float) -> None:
        for ev in events:
            if ev.tick > self.last_tick:
                break
            if ev.tick > self.warmup:
                self._pending.append(ev.to_tick_record())
                continue
            if self.probes.warmup_ticks:
                self._pending.append(ev.to_tick_record(warmup=True))
            if ev.tick == self.warmup:
                self.measure_start = ev.time
        if self.tick_sink is not None and len(self._pending) >= 4096:
            self.flush()

        if not self.measuring(state):
            self._last_post_z = state.z.copy()
            return
        half = state.L / 2.0

        if self.probes.trend_pairs and self._last_post_z is not None and events[0].tick > self.warmup:
            # trend of the previous tick against the moves made since it
            dz = pre_z - self._last_post_z
            self._trend.append(np.column_stack([np.full(dz.size, dp_before), dz]))
        self._last_post_z = state.z.copy()

        if self.book is not None:
            self._settlement_requotes(state, pre_z, events, half)

        if (self.profiles or self.probes.trajectory) and state.step % self.snapshot_every == 0:
            self._snapshot(state.z[None, :], half, np.array([state.t]))

    def _settlement_requotes(self, state: SimState, pre_z: np.ndarray,
                             events: List[TransactionEvent], half: np.ndarray) -> None:
        mid_pre = 0.5 * ((pre_z - half).max() + (pre_z + half).min())
        mid_post = state.market_midprice()
        for ev in events:
            if ev.tick < self.warmup:
                continue
            i, j = ev.buyer, ev.seller
            # the buyer's bid and the seller's ask were filled; the other quotes move
            self._emit(
                np.full(6, ev.tick, dtype=np.int64),
                np.full(6, ev.time),
                np.array([BID, ASK, ASK, ASK, BID, BID]),
                np.array([SUBMISSION, CANCELLATION, SUBMISSION, SUBMISSION, CANCELLATION, SUBMISSION]),
                np.array([
                    mid_post - (state.z[i] - half[i]),
                    (pre_z[i] + half[i]) - mid_pre,
                    (state.z[i] + half[i]) - mid_post,
                    (state.z[j] + half[j]) - mid_post,
                    mid_pre - (pre_z[j] - half[j]),
                    mid_post - (state.z[j] - half[j]),
                ]),
                np.array([i, i, i, j, j, j]),
            )

    def flush(self) -> None:
        if not self._pending:
            return
        if self.tick_sink is not None:
            self.tick_sink(self._pending)
        if self.probes.ticks:
            self.ticks.extend(self._pending)
        self._pending = []

    def trend_pairs(self) -> np.ndarray:
        if not self._trend:
            return np.empty((0, 2))
        return np.vstack(self._trend)

    def trajectory(self) -> np.ndarray:
        if not self._traj:
            return np.empty((0, 3))
        return np.vstack(self._traj)


@dataclass
class SimulationResult:
    config: ExperimentConfig
    variant: str
    ticks: List[TickRecord]
    book_events: object
    profiles: Dict[str, ProfileHistogram]
    trend_pairs: np.ndarray
    trajectory: np.ndarray
    elapsed: float
    steps: int
    final_state: SimState = field(repr=False)

    def __iter__(self):
        yield self.ticks
        yield self.book_events
        yield list(self.profiles.values())

    @property
    def intervals(self) -> np.ndarray:
        return np.array([rec.interval for rec in self.ticks if not rec.warmup])

    @property
    def price_moves(self) -> np.ndarray:
        return np.array([rec.dp for rec in self.ticks if not rec.warmup])


def block_size(config: ExperimentConfig, dt: float) -> int:
    """Roughly half a mean interval of steps per block"""
    return int(min(max(0.5 * config.tau_star / dt, 16), 1024))


def run_simulation(config: ExperimentConfig, rng: RngStream, probes: Optional[Probes] = None,
                   variant: str = CONTINUOUS,
                   tick_sink: Optional[Callable[[List[TickRecord]], None]] = None,
                   max_steps: Optional[int] = None) -> SimulationResult:
    """
    Run until n_transactions ticks past the warmup have been recorded.

    Ticks are passed to `tick_sink` in chunks as they are produced and are
    also kept in the result when the ticks probe is on.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    probes = probes or Probes()
    dt = effective_dt(config, variant)
    state = init_state(config, rng)
    noise = trader_noise(rng, config.N, variant)
    observer = RunObserver(config, probes, dt, tick_sink)

    target = config.warmup_transactions + config.n_transactions
    block = block_size(config, dt)
    budget = max_steps or int(1000 * target * config.tau_star / dt) + 10 * block
    logger.info("🔄 %s run: N=%d, %d ticks after %d warmup, dt=%.4g",
                variant, config.N, config.n_transactions, config.warmup_transactions, dt)

    progress_every = max(target // 10, 1)
    next_report = progress_every
    while state.T < target:
        if state.step >= budget:
            raise ModelError(f"no progress: {state.T} of {target} transactions after {state.step} steps")
        advance(state, config, noise, variant, block, observer, dt)
        if state.T >= next_report:
            logger.debug("📊 %d/%d transactions, t=%.4g", state.T, target, state.t)
            next_report += progress_every
    observer.flush()

    start = observer.measure_start if observer.measure_start is not None else 0.0
    end = observer.ticks[-1].time if observer.ticks else state.last_transaction_time
    logger.info("✅ %s run finished: %d ticks, %d steps", variant, state.T, state.step)
    return SimulationResult(
        config=config,
        variant=variant,
        ticks=observer.ticks,
        book_events=observer.book,
        profiles=observer.profiles,
        trend_pairs=observer.trend_pairs(),
        trajectory=observer.trajectory(),
        elapsed=end - start,
        steps=state.step,
        final_state=state,
    )


def lag_displacement_variance(times: np.ndarray, values: np.ndarray, lag: float) -> float:
    """
    Variance of values(t + lag) - values(t) over an evenly sampled series
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two samples")
    spacing = float(np.median(np.diff(times)))
    shift = max(int(round(lag / spacing)), 1)
    if shift >= values.size:
        raise ValueError(f"lag {lag} exceeds the series length")
    return float(np.var(values[shift:] - values[:-shift]))


def collective_motion_ratio(trending: SimulationResult, diffusive: SimulationResult,
                            lag_in_tau: float = 10.0) -> float:
    """
    Ratio of c.m. displacement variances at a lag of `lag_in_tau` mean
    intervals; both runs need the trajectory probe
    """
    lag = lag_in_tau * trending.config.tau_star
    num = lag_displacement_variance(trending.trajectory[:, 0], trending.trajectory[:, 1], lag)
    den = lag_displacement_variance(diffusive.trajectory[:, 0], diffusive.trajectory[:, 1], lag)
    return num / den
