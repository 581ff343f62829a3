"""
Core domain types shared by every model
Parameter validation, seeded random streams and the gamma spread sampler
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np


class HftKineticsError(Exception):
    """Base error for the package"""


class ConfigError(HftKineticsError):
    """
    Invalid configuration; carries every violated constraint with its field
    """

    def __init__(self, issues: List[Tuple[str, str]]):
        self.issues = list(issues)
        super().__init__("; ".join(f"{name}: {message}" for name, message in self.issues))


class ModelError(HftKineticsError):
    """A model run could not continue"""


class FitError(HftKineticsError):
    """An estimator pre-condition failed or a fit did not converge"""


# Required keys of a microscopic-model parameter map
REQUIRED_FIELDS = ('N', 'L_star', 'dp_star', 'dz_star', 'sigma', 'n_transactions', 'seed')

# Runner guard: dt <= DT_FRACTION * L*^2 / (N sigma^2)
DT_FRACTION = 1.0e-2


class RngStream:
    def __init__(self, seed: Any = 0):
        """
        Deterministic random stream backed by a counter-based Philox generator
        """
        if isinstance(seed, np.random.SeedSequence):
            self.seed_sequence = seed
        else:
            self.seed_sequence = np.random.SeedSequence(int(seed))
        self.generator = np.random.Generator(np.random.Philox(self.seed_sequence))

    def child(self, *keys: int) -> 'RngStream':
        """
        Independent substream addressed by integer keys; stateless, so the
        same keys always give the same stream
        """
        seq = np.random.SeedSequence(
            self.seed_sequence.entropy,
            spawn_key=tuple(self.seed_sequence.spawn_key) + tuple(int(k) for k in keys),
        )
        return RngStream(seq)

    def replicas(self, count: int) -> List['RngStream']:
        return [self.child(0x5EED, k) for k in range(count)]

    def replica_seed(self, index: int) -> int:
        """64-bit integer seed of replica `index`, stable across runs"""
        state = self.child(0x5EED, index).seed_sequence.generate_state(2, dtype=np.uint32)
        return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class SpreadDistribution:
    L_star: float

    @property
    def mean(self) -> float:
        return 4.0 * self.L_star

    @property
    def variance(self) -> float:
        return 4.0 * self.L_star ** 2


def sample_spread(rng: RngStream, dist: SpreadDistribution, size: Optional[int] = None):
    """
    Shape-4 gamma spreads as the sum of four exponentials of mean L*
    """
    n = 1 if size is None else int(size)
    draws = rng.generator.exponential(dist.L_star, size=(n, 4)).sum(axis=1)
    return float(draws[0]) if size is None else draws


@dataclass(frozen=True)
class TraderState:
    id: int
    z: float
    L: float

    @property
    def bid(self) -> float:
        return self.z - self.L / 2.0

    @property
    def ask(self) -> float:
        return self.z + self.L / 2.0


@dataclass(frozen=True)
class TickRecord:
    tick: int
    time: float
    interval: float
    price: float
    dp: float
    buyer: int = -1
    seller: int = -1
    warmup: bool = False


def mean_interval_guideline(N: float, sigma: float, L_star: float) -> float:
    return 3.0 * L_star ** 2 / (N * sigma ** 2)


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    L_star: float
    dp_star: float
    dz_star: float
    sigma: float
    n_transactions: int
    seed: int
    dt: float
    dt_can: float
    warmup_transactions: int
    snapshot_interval: float
    strict_dt: bool = True
    tau_star: float = field(init=False)
    c: float = field(init=False)

    def __post_init__(self):
        tau_star = mean_interval_guideline(self.N, self.sigma, self.L_star)
        object.__setattr__(self, 'tau_star', tau_star)
        object.__setattr__(self, 'c', self.dz_star / tau_star)

    @property
    def kappa_predicted(self) -> float:
        return 2.0 * self.dz_star / 3.0

    @property
    def dt_limit(self) -> float:
        return DT_FRACTION * self.L_star ** 2 / (self.N * self.sigma ** 2)

    @property
    def spread_distribution(self) -> SpreadDistribution:
        return SpreadDistribution(self.L_star)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'N': self.N, 'L_star': self.L_star, 'dp_star': self.dp_star,
            'dz_star': self.dz_star, 'sigma': self.sigma, 'dt': self.dt,
            'dt_can': self.dt_can, 'n_transactions': self.n_transactions,
            'seed': self.seed, 'warmup_transactions': self.warmup_transactions,
            'snapshot_interval': self.snapshot_interval, 'strict_dt': self.strict_dt,
        }


def parse_number(raw: Mapping[str, Any], name: str, issues: List[Tuple[str, str]],
            integer: bool = False) -> Optional[float]:
    value = raw.get(name)
    if isinstance(value, bool):
        issues.append((name, f"expected a number, got {value!r}"))
        return None
    try:
        number = int(value) if integer else float(value)
    except (TypeError, ValueError, OverflowError):
        issues.append((name, f"expected a number, got {value!r}"))
        return None
    if integer and float(value) != number:
        issues.append((name, f"expected an integer, got {value!r}"))
        return None
    if not integer and not math.isfinite(number):
        issues.append((name, f"must be finite, got {value!r}"))
        return None
    return number


def check_positive(raw: Mapping[str, Any], names, issues: List[Tuple[str, str]],
                   integer: bool = False) -> Dict[str, float]:
    """
    Parse each present field and record a non-positive value as an issue
    """
    values = {}
    for name in names:
        if raw.get(name) is None:
            continue
        number = parse_number(raw, name, issues, integer=integer)
        if number is None:
            continue
        if number <= 0:
            issues.append((name, f"must be > 0, got {number}"))
            continue
        values[name] = number
    return values


def validate_config(raw: Mapping[str, Any]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a parsed key-value map; every violated
    constraint is reported with its field name
    """
    issues: List[Tuple[str, str]] = []
    raw = dict(raw or {})

    for name in REQUIRED_FIELDS:
        if raw.get(name) is None:
            issues.append((name, "missing field"))

    n = None
    if raw.get('N') is not None:
        n = parse_number(raw, 'N', issues, integer=True)
        if n is not None and n < 2:
            issues.append(('N', f"N<2: no collision partner exists (got {n})"))
            n = None

    reals = check_positive(raw, ('L_star', 'dp_star', 'sigma', 'dt', 'dt_can', 'snapshot_interval'), issues)
    counts = check_positive(raw, ('n_transactions',), issues, integer=True)

    dz_star = None
    if raw.get('dz_star') is not None:
        dz_star = parse_number(raw, 'dz_star', issues)
        if dz_star is not None and dz_star < 0:
            issues.append(('dz_star', f"must be >= 0, got {dz_star}"))
            dz_star = None

    seed = None
    if raw.get('seed') is not None:
        seed = parse_number(raw, 'seed', issues, integer=True)
        if seed is not None and not 0 <= seed < 2 ** 64:
            issues.append(('seed', f"must be a 64-bit unsigned integer, got {seed}"))
            seed = None

    warmup = None
    if raw.get('warmup_transactions') is not None:
        warmup = parse_number(raw, 'warmup_transactions', issues, integer=True)
        if warmup is not None and warmup < 0:
            issues.append(('warmup_transactions', f"must be >= 0, got {warmup}"))

    strict_dt = raw.get('strict_dt', True)
    if not isinstance(strict_dt, bool):
        issues.append(('strict_dt', f"expected true/false, got {strict_dt!r}"))

    known = set(REQUIRED_FIELDS) | {'dt', 'dt_can', 'warmup_transactions', 'snapshot_interval', 'strict_dt'}
    for name in sorted(set(raw) - known):
        issues.append((name, "unknown field"))

    if issues:
        raise ConfigError(issues)

    L_star, sigma = reals['L_star'], reals['sigma']
    tau_star = mean_interval_guideline(n, sigma, L_star)
    dt_limit = DT_FRACTION * L_star ** 2 / (n * sigma ** 2)
    dt = reals.get('dt', dt_limit)
    if strict_dt and dt > dt_limit * (1 + 1e-12):
        raise ConfigError([('dt', f"dt={dt} exceeds {DT_FRACTION} L*^2/(N sigma^2) = {dt_limit}")])

    return ExperimentConfig(
        N=n,
        L_star=L_star,
        dp_star=reals['dp_star'],
        dz_star=dz_star,
        sigma=sigma,
        n_transactions=int(counts['n_transactions']),
        seed=int(seed),
        dt=dt,
        dt_can=reals.get('dt_can', tau_star / 4.0),
        warmup_transactions=int(10 * n if warmup is None else warmup),
        snapshot_interval=reals.get('snapshot_interval', tau_star / 4.0),
        strict_dt=strict_dt,
    )
