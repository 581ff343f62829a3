"""
Macroscopic price-movement iteration

dp(T+1) = c tau(T) tanh(dp(T) / dp*) + zeta(T), with tau drawn from the
transaction-interval law and zeta a zero-mean Gaussian independent of tau.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, List, Mapping, Optional, Tuple

import numpy as np

from hft_kinetics.core import ConfigError, ExperimentConfig, RngStream, check_positive, parse_number
from hft_kinetics.kinetics import IntervalLaw, price_tail_kappa
from hft_kinetics.stats import empirical_ccdf, fit_exponential_decay

logger = logging.getLogger(__name__)

# Draws generated per batch inside run_langevin
_CHUNK = 1 << 16


@dataclass(frozen=True)
class LangevinConfig:
    c: float
    dp_star: float
    tau_law: IntervalLaw
    zeta_scale: float
    n_ticks: int
    seed: int
    warmup: int = 1000

    @property
    def dz_star(self) -> float:
        return self.c * self.tau_law.tau_star

    @property
    def kappa_predicted(self) -> float:
        return price_tail_kappa(self.dz_star)

    @classmethod
    def from_experiment(cls, config: ExperimentConfig, zeta_scale: float, n_ticks: int,
                        seed: Optional[int] = None, warmup: int = 1000) -> 'LangevinConfig':
        """Macroscopic counterpart of a microscopic parameter set"""
        return cls(c=config.c, dp_star=config.dp_star, tau_law=IntervalLaw(config.tau_star),
                   zeta_scale=zeta_scale, n_ticks=n_ticks,
                   seed=config.seed if seed is None else seed, warmup=warmup)

    def as_dict(self):
        return {
            'c': self.c, 'dp_star': self.dp_star, 'tau_star': self.tau_law.tau_star,
            'zeta_scale': self.zeta_scale, 'n_ticks': self.n_ticks, 'seed': self.seed,
            'warmup': self.warmup,
        }


def validate_langevin_config(raw: Mapping[str, Any]) -> LangevinConfig:
    """
    Accepts either (c, tau_star) or (dz_star, tau_star); c = dz*/tau*
    """
    issues: List[Tuple[str, str]] = []
    raw = dict(raw or {})
    for name in ('dp_star', 'tau_star', 'zeta_scale', 'n_ticks', 'seed'):
        if raw.get(name) is None:
            issues.append((name, "missing field"))
    if raw.get('c') is None and raw.get('dz_star') is None:
        issues.append(('c', "give c or dz_star"))
    if raw.get('c') is not None and raw.get('dz_star') is not None:
        issues.append(('c', "give only one of c and dz_star"))

    reals = check_positive(raw, ('dp_star', 'tau_star', 'zeta_scale'), issues)
    counts = check_positive(raw, ('n_ticks',), issues, integer=True)

    trend = {}
    for name in ('c', 'dz_star'):
        if raw.get(name) is not None:
            value = parse_number(raw, name, issues)
            if value is not None and value < 0:
                issues.append((name, f"must be >= 0, got {value}"))
            elif value is not None:
                trend[name] = value

    seed = None
    if raw.get('seed') is not None:
        seed = parse_number(raw, 'seed', issues, integer=True)
        if seed is not None and not 0 <= seed < 2 ** 64:
            issues.append(('seed', f"must be a 64-bit unsigned integer, got {seed}"))

    warmup = 1000
    if raw.get('warmup') is not None:
        warmup = parse_number(raw, 'warmup', issues, integer=True)
        if warmup is not None and warmup < 0:
            issues.append(('warmup', f"must be >= 0, got {warmup}"))

    known = {'c', 'dz_star', 'dp_star', 'tau_star', 'zeta_scale', 'n_ticks', 'seed', 'warmup'}
    for name in sorted(set(raw) - known):
        issues.append((name, "unknown field"))
    if issues:
        raise ConfigError(issues)

    tau_star = reals['tau_star']
    c = trend['c'] if 'c' in trend else trend['dz_star'] / tau_star
    return LangevinConfig(c=c, dp_star=reals['dp_star'], tau_law=IntervalLaw(tau_star),
                          zeta_scale=reals['zeta_scale'], n_ticks=int(counts['n_ticks']),
                          seed=int(seed), warmup=int(warmup))


def langevin_step(dp: float, tau: float, zeta: float, config: LangevinConfig) -> float:
    return config.c * tau * math.tanh(dp / config.dp_star) + zeta


def langevin_step_linear(dp: float, tau: float, zeta: float, config: LangevinConfig) -> float:
    """Small-trend form: tanh(x) ~ x"""
    return config.c * tau * dp / config.dp_star + zeta


def run_langevin(config: LangevinConfig, rng: RngStream) -> np.ndarray:
    """
    Stationary dp series of length n_ticks after `warmup` discarded steps
    """
    total = config.warmup + config.n_ticks
    out = np.empty(total)
    step = langevin_step
    taus = rng.child(1)
    noise = rng.child(2).generator
    dp = 0.0

    logger.info("🔄 langevin run: %d ticks, dz*=%.4g, dp*=%.4g", config.n_ticks, config.dz_star, config.dp_star)
    for start in range(0, total, _CHUNK):
        size = min(_CHUNK, total - start)
        tau = config.tau_law.sample(taus, size)
        zeta = noise.normal(0.0, config.zeta_scale, size)
        values = []
        for t, z in zip(tau.tolist(), zeta.tolist()):
            dp = step(dp, t, z, config)
            values.append(dp)
        out[start:start + size] = values
    return out[config.warmup:]


def split_half_kappa(samples, x_min: float, min_probability: float = 1e-3):
    """
    Decay lengths of |dp| fitted separately on the two halves of a run
    """
    samples = np.abs(np.asarray(samples, dtype=float))
    half = samples.size // 2
    fits = [fit_exponential_decay(empirical_ccdf(part), x_min=x_min, min_probability=min_probability)
            for part in (samples[:half], samples[half:])]
    return fits[0].kappa, fits[1].kappa
