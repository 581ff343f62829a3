"""
Analytic oracles for the trend-following trader model

Closed forms of the mean-field steady state (spread law, tent profile,
average order book, transaction-interval law, price-movement tail and its
power-law superposition) plus the two small auxiliary simulations of a
Brownian walker confined by hopping barriers.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate

from hft_kinetics.core import ModelError, RngStream, mean_interval_guideline

# Oracle integrals must out-precision Monte Carlo by orders of magnitude
QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-12
# A piecewise sum is accepted when its error estimate is below this
QUAD_ACCEPT_ABS = 1e-10
QUAD_ACCEPT_REL = 1e-7


def _quad(func: Callable[[float], float], a: float, b: float, points=None) -> float:
    """
    Piecewise quadrature split at `points` (which may precede an infinite
    upper bound); quad's roundoff notices are ignored and only an error
    estimate above tolerance raises ModelError
    """
    cuts = [a] + sorted(p for p in (points or ()) if a < p < b) + [b]
    total = 0.0
    error = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', integrate.IntegrationWarning)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            result = integrate.quad(func, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=400,
                                    full_output=1)
            total += result[0]
            error += result[1]
    if not math.isfinite(total) or error > max(QUAD_ACCEPT_ABS, QUAD_ACCEPT_REL * abs(total)):
        raise ModelError(f"quadrature did not converge on [{a}, {b}]: error estimate {error:.3g}")
    return total


def spread_pdf(L, L_star: float):
    """
    Gamma law of shape 4: rho(L) = L^3 exp(-L/L*) / (6 L*^4)
    """
    L = np.asarray(L, dtype=float)
    if np.any(L < 0):
        raise ValueError("spread must be >= 0")
    if L_star <= 0:
        raise ValueError("L_star must be > 0")
    value = L ** 3 * np.exp(-L / L_star) / (6.0 * L_star ** 4)
    return float(value) if value.ndim == 0 else value


def spread_ccdf(L, L_star: float):
    x = np.asarray(L, dtype=float) / L_star
    value = np.exp(-x) * (1.0 + x + x ** 2 / 2.0 + x ** 3 / 6.0)
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class TentProfile:
    L: float

    def density(self, r):
        return tent_density(r, self.L)

    def cdf(self, r):
        """
        Integral of the tent from -L/2 to r
        """
        h = self.L / 2.0
        x = np.clip(np.asarray(r, dtype=float), -h, h)
        left = (x + h) ** 2 / (2.0 * h ** 2)
        right = 1.0 - (h - x) ** 2 / (2.0 * h ** 2)
        value = np.where(x <= 0, left, right)
        return float(value) if value.ndim == 0 else value


def tent_density(r, L: float):
    """
    psi_L(r) = (4/L^2) max(L/2 - |r|, 0)
    """
    r = np.asarray(r, dtype=float)
    value = 4.0 / L ** 2 * np.maximum(L / 2.0 - np.abs(r), 0.0)
    return float(value) if value.ndim == 0 else value


def avg_orderbook_profile(r, L_star: float):
    """
    Average ask-side profile for gamma-distributed spreads (closed form)
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("the ask profile is defined for r >= 0")
    x = r / L_star
    value = 4.0 / (3.0 * L_star) * np.exp(-1.5 * x) * ((2.0 + x) * np.sinh(x / 2.0) - x / 2.0 * np.exp(-x / 2.0))
    return float(value) if value.ndim == 0 else value


def avg_orderbook_cdf(r, L_star: float):
    """
    Cumulative of the average ask profile; zero for r <= 0
    """
    x = np.maximum(np.asarray(r, dtype=float), 0.0) / L_star
    value = 1.0 - 2.0 / 3.0 * (x + 3.0) * np.exp(-x) + 2.0 / 3.0 * (x + 1.5) * np.exp(-2.0 * x)
    return float(value) if value.ndim == 0 else value


def avg_orderbook_profile_quad(r: float, L_star: float,
                               density: Optional[Callable[[float], float]] = None) -> float:
    """
    Numerical convolution f_A(r) = int dL rho(L) psi_L(r - L/2)
    """
    if r < 0:
        raise ValueError("the ask profile is defined for r >= 0")
    if r == 0:
        return 0.0
    rho = density or (lambda L: spread_pdf(L, L_star))

    def integrand(L):
        return rho(L) * tent_density(r - L / 2.0, L)

    # psi_L(r - L/2) vanishes for L < r and has a kink at L = 2r
    inner = _quad(integrand, r, 2.0 * r)
    outer = _quad(integrand, 2.0 * r, np.inf, points=[2.0 * r + 10.0 * L_star])
    return inner + outer


def mean_transaction_interval(N: float, sigma: float, L_star: float) -> float:
    """
    tau* = 3 L*^2 / (N sigma^2)
    """
    return mean_interval_guideline(N, sigma, L_star)


def mean_transaction_interval_general(N: float, sigma: float,
                                      density: Callable[[float], float]) -> float:
    """
    tau* = 1 / (2 N sigma^2 int L^-2 rho(L) dL) for an arbitrary spread density
    """
    moment = _quad(lambda L: density(L) / L ** 2 if L > 0 else 0.0, 0.0, np.inf)
    return 1.0 / (2.0 * N * sigma ** 2 * moment)


@dataclass(frozen=True)
class IntervalLaw:
    tau_star: float

    @property
    def a(self) -> float:
        # self-consistency tau* = 3a/2
        return 2.0 * self.tau_star / 3.0

    def ccdf(self, tau):
        return interval_ccdf(tau, self.tau_star)

    def cdf(self, tau):
        tau = np.maximum(np.asarray(tau, dtype=float), 0.0)
        value = (1.0 - np.exp(-tau / self.a)) ** 2
        return float(value) if value.ndim == 0 else value

    def sample(self, rng: RngStream, size: int) -> np.ndarray:
        """
        Inverse-CDF draws: tau = -a log(1 - sqrt(u))
        """
        u = rng.generator.random(size)
        return -self.a * np.log1p(-np.sqrt(u))

    def mean_by_quadrature(self) -> float:
        return _quad(lambda t: interval_ccdf(t, self.tau_star), 0.0, np.inf,
                     points=[self.tau_star, 20.0 * self.tau_star])


def interval_ccdf(tau, tau_star: float):
    """
    P(>= tau) = 1 - (1 - exp(-3 tau / 2 tau*))^2
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    value = 1.0 - (1.0 - np.exp(-1.5 * tau / tau_star)) ** 2
    return float(value) if value.ndim == 0 else value


def price_tail_kappa(dz_star: float) -> float:
    return 2.0 * dz_star / 3.0


def price_tail_ccdf(dp_abs, dz_star: float):
    """
    Exponential tail of |dp|: exp(-3|dp| / 2 dz*); valid for dz* >> dp*
    """
    dp_abs = np.asarray(dp_abs, dtype=float)
    value = np.exp(-np.abs(dp_abs) / price_tail_kappa(dz_star))
    return float(value) if value.ndim == 0 else value


def _check_mixture(m: float, kappa_min: float, kappa_max: float):
    if m <= 0:
        raise ValueError("m must be > 0")
    if not 0 < kappa_min <= kappa_max:
        raise ValueError("need 0 < kappa_min <= kappa_max")


def powerlaw_mixture_ccdf(dp_abs, m: float, kappa_min: float, kappa_max: float):
    """
    Superposition int Q(kappa) exp(-|dp|/kappa) dkappa with Q ~ kappa^(-m-1)
    truncated to [kappa_min, kappa_max]
    """
    _check_mixture(m, kappa_min, kappa_max)
    xs = np.abs(np.atleast_1d(np.asarray(dp_abs, dtype=float)))

    if kappa_min == kappa_max:
        out = np.exp(-xs / kappa_min)
    else:
        norm = kappa_min ** -m - kappa_max ** -m
        u_lo, u_hi = math.log(kappa_min), math.log(kappa_max)
        out = np.empty_like(xs)
        for k, x in enumerate(xs):
            if x == 0:
                out[k] = 1.0
                continue
            # integrate over u = log(kappa); Q(kappa) dkappa = m kappa^-m du / norm
            def integrand(u, x=x):
                return m * math.exp(-m * u - x * math.exp(-u)) / norm
            out[k] = _quad(integrand, u_lo, u_hi)
    return float(out[0]) if np.ndim(dp_abs) == 0 else out


def sample_powerlaw_mixture(rng: RngStream, size: int, m: float, kappa_min: float,
                            kappa_max: float, signed: bool = False) -> np.ndarray:
    """
    Draw kappa from the truncated power law, then an exponential of scale kappa
    """
    _check_mixture(m, kappa_min, kappa_max)
    gen = rng.generator
    u = gen.random(size)
    lo, hi = kappa_min ** -m, kappa_max ** -m
    kappa = (lo - u * (lo - hi)) ** (-1.0 / m)
    dp = gen.exponential(1.0, size) * kappa
    if signed:
        dp *= np.where(gen.random(size) < 0.5, -1.0, 1.0)
    return dp


def _barrier_exits(x0: np.ndarray, x1: np.ndarray, half: float, var_dt: float,
                   gen: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exit mask over one step and the crossing fraction of the step; paths that
    stay inside may still have touched a barrier (Brownian-bridge probability)
    """
    over = np.abs(x1) >= half
    frac = np.full(x1.shape, 0.5)
    if over.any():
        target = np.sign(x1[over]) * half
        step = x1[over] - x0[over]
        with np.errstate(divide='ignore', invalid='ignore'):
            f = np.where(step != 0, (target - x0[over]) / step, 0.0)
        frac[over] = np.clip(f, 0.0, 1.0)
    inside = ~over
    if inside.any():
        up = np.exp(-2.0 * (half - x0[inside]) * (half - x1[inside]) / var_dt)
        down = np.exp(-2.0 * (half + x0[inside]) * (half + x1[inside]) / var_dt)
        touched = gen.random(int(inside.sum())) < np.minimum(up + down, 1.0)
        over[inside] = touched
    return over, frac


def hopping_barrier_mfpt(L: float, sigma: float, rng: RngStream, n_samples: int = 100_000,
                         dt: Optional[float] = None) -> float:
    """
    Monte Carlo mean first-passage time from r=0 to |r| = L/2; the closed
    form is L^2 / (4 sigma^2)
    """
    half = L / 2.0
    dt = dt or 1.0e-3 * L ** 2 / sigma ** 2
    gen = rng.generator
    var_dt = sigma ** 2 * dt
    scale = sigma * math.sqrt(dt)
    x = np.zeros(n_samples)
    alive = np.arange(n_samples)
    exit_time = np.empty(n_samples)
    max_steps = int(200 * 0.25 * L ** 2 / sigma ** 2 / dt) + 1000

    for step in range(max_steps):
        if alive.size == 0:
            break
        x0 = x[alive]
        x1 = x0 + scale * gen.standard_normal(alive.size)
        done, frac = _barrier_exits(x0, x1, half, var_dt, gen)
        exit_time[alive[done]] = (step + frac[done]) * dt
        x[alive] = x1
        alive = alive[~done]
    else:
        raise ModelError("hopping-barrier walkers did not all exit")
    return float(exit_time.mean())


def hopping_barrier_stationary(L: float, sigma: float, rng: RngStream, n_walkers: int = 4000,
                               duration: Optional[float] = None, dt: Optional[float] = None,
                               bins: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """
    Occupation density of walkers that hop back to r=0 whenever they hit
    |r| = L/2; returns (bin edges, density)
    """
    half = L / 2.0
    unit = L ** 2 / sigma ** 2
    dt = dt or 1.25e-3 * unit
    duration = duration or 12.5 * unit
    gen = rng.generator
    var_dt = sigma ** 2 * dt
    scale = sigma * math.sqrt(dt)
    n_steps = int(round(duration / dt))
    burn_in = n_steps // 5

    edges = np.linspace(-half, half, bins + 1)
    counts = np.zeros(bins)
    x = np.zeros(n_walkers)
    for step in range(n_steps):
        x1 = x + scale * gen.standard_normal(n_walkers)
        hopped, _ = _barrier_exits(x, x1, half, var_dt, gen)
        x1[hopped] = 0.0
        x = x1
        if step >= burn_in:
            counts += np.histogram(x, bins=edges)[0]
    density = counts / (counts.sum() * np.diff(edges))
    return edges, density


def normalization_errors(L_star: float, L: float) -> dict:
    """
    |1 - integral| of the spread law, the tent of width L and the average
    ask profile, all by quadrature
    """
    rho = _quad(lambda x: spread_pdf(x, L_star), 0.0, np.inf, points=[3.0 * L_star, 20.0 * L_star])
    tent = _quad(lambda r: tent_density(r, L), -L / 2.0, L / 2.0, points=[0.0])
    profile = _quad(lambda r: avg_orderbook_profile(r, L_star), 0.0, np.inf,
                    points=[2.0 * L_star, 20.0 * L_star])
    return {'spread': abs(1.0 - rho), 'tent': abs(1.0 - tent), 'profile': abs(1.0 - profile)}
