"""Seeded surrogate generators: white noise, fGn, long-memory volatility, tick paths."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .volatility import (
    SSE_SESSIONS,
    IntradayPattern,
    Session,
    Stage,
    TickSeries,
    VolatilitySeries,
    iter_labels,
)

MINUTES_PER_DAY = sum(s.minutes for s in SSE_SESSIONS)


def fgn_autocovariance(H: float, k) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise at lags ``k``."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _check(H: float, n: int) -> None:
    if not 0 < H < 1:
        raise ValueError("Hurst exponent must lie in (0, 1)")
    if n < 2 or n & (n - 1):
        raise ValueError("length must be a power of 2")


def gen_fgn(H: float, n: int, seed=None) -> np.ndarray:
    """Exact fGn by circulant embedding (Davies-Harte).

    The covariance row ``c_0..c_n, c_{n-1}..c_1`` of the 2n-circulant has a
    nonnegative spectrum for every H in (0, 1); the real part of the FFT of
    spectrally weighted complex normals then has exactly the fGn covariance.
    """
    _check(H, n)
    rng = np.random.default_rng(seed)
    m = 2 * n
    c = fgn_autocovariance(H, np.arange(n + 1))
    row = np.concatenate([c, c[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-9 * lam.max():
        raise AssertionError("circulant embedding is not positive semidefinite")
    lam = np.maximum(lam, 0.0)
    xi = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(np.sqrt(lam / m) * xi).real[:n]


def gen_white_noise(n: int, seed=None) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(n)


def gen_longmemory_volatility(
    H: float,
    n: int,
    seed=None,
    pattern: IntradayPattern | None = None,
    sigma0: float = 1.0,
    minutes_per_day: int = MINUTES_PER_DAY,
) -> VolatilitySeries:
    """Log-normal volatility ``exp(sigma0 * fGn_H)``, optionally times an intraday pattern."""
    g = gen_fgn(H, n, seed)
    mod, day = iter_labels(n, minutes_per_day)
    v = np.exp(sigma0 * g)
    if pattern is not None:
        v = v * pattern.lookup(mod)
    return VolatilitySeries(v, mod, day, Stage.RAW)


def u_shaped_pattern(minutes_per_day: int = MINUTES_PER_DAY, depth: float = 0.6) -> IntradayPattern:
    """Smooth U shape: 1 + depth at the open and close, 1 - depth/2 at midday-ish."""
    m = np.arange(minutes_per_day)
    u = (m - (minutes_per_day - 1) / 2) / ((minutes_per_day - 1) / 2)
    return IntradayPattern(m, 1 - depth / 2 + 1.5 * depth * u**2)


@dataclass(frozen=True)
class TickPathSpec:
    days: int = 10
    sessions: tuple[Session, ...] = tuple(SSE_SESSIONS)
    mean_spacing: float = 7.0
    sigma: float = 2e-4
    start_price: float = 100.0
    first_day: int = 12418  # 2004-01-01 in days since the epoch
    seed: int = 0


def gen_tick_path(spec: TickPathSpec = TickPathSpec()) -> TickSeries:
    """Geometric random walk observed at exponential inter-tick times.

    Gaps are rounded to whole seconds (at least 1 s).  Log-price increments have
    variance ``sigma**2`` per second of elapsed time, so consecutive sessions join
    continuously and the path is diffusive.
    """
    rng = np.random.default_rng(spec.seed)
    times, logp = [], []
    level = np.log(spec.start_price)
    for d in range(spec.days):
        base = (spec.first_day + d) * 86400
        for s in spec.sessions:
            span = s.close - s.open
            count = int(span / spec.mean_spacing * 1.5) + 16
            gaps = np.maximum(1.0, np.rint(rng.exponential(spec.mean_spacing, count)))
            offs = np.cumsum(gaps)
            offs = np.concatenate([[0.0], offs[offs <= span]])
            dt = np.diff(offs, prepend=offs[0])
            steps = spec.sigma * np.sqrt(dt) * rng.standard_normal(len(offs))
            path = level + np.cumsum(steps)
            level = path[-1]
            times.append(base + s.open + offs.astype(np.int64))
            logp.append(path)
    return TickSeries(np.concatenate(times), np.exp(np.concatenate(logp)), spec.sessions)


class SurrogateKind(str, enum.Enum):
    WHITE_NOISE = "white_noise"
    FGN = "fgn"
    LONGMEMORY_VOLATILITY = "longmemory_volatility"
    TICK_PATH = "tick_path"


@dataclass(frozen=True)
class SurrogateSpec:
    kind: SurrogateKind
    n: int = 2**17
    hurst: float = 0.5
    seed: int = 0
    tick: TickPathSpec = field(default_factory=TickPathSpec)


def generate(spec: SurrogateSpec):
    kind = SurrogateKind(spec.kind)
    if kind is SurrogateKind.WHITE_NOISE:
        return gen_white_noise(spec.n, spec.seed)
    if kind is SurrogateKind.FGN:
        return gen_fgn(spec.hurst, spec.n, spec.seed)
    if kind is SurrogateKind.LONGMEMORY_VOLATILITY:
        return gen_longmemory_volatility(spec.hurst, spec.n, spec.seed)
    return gen_tick_path(spec.tick)
