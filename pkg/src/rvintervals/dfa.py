"""Detrended fluctuation analysis (DFA-1) with two-regime crossover detection.

``F(l)`` is the root mean square residual of the mean-removed profile after a
least-squares line is subtracted in each window of length ``l``.  Windows are
laid from the front and again from the back of the profile, so every point is
used at scales that do not divide the series length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError, InsufficientSampleError
from .intervals import extract_intervals
from .volatility import VolatilitySeries

MIN_SCALE = 4


def default_scales(n: int, count: int = 20, lo: int = 8) -> np.ndarray:
    """About ``count`` log-spaced integer scales in ``[lo, n // 4]``."""
    hi = n // 4
    if hi < lo:
        raise ValueError(f"series of length {n} too short for scales >= {lo}")
    return np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))


def _window_sse(windows: np.ndarray) -> np.ndarray:
    """Residual sum of squares of each row about its least-squares line."""
    l = windows.shape[1]
    t = np.arange(l) - (l - 1) / 2.0
    centered = windows - windows.mean(axis=1, keepdims=True)
    slope = centered @ t / (t @ t)
    resid = centered - slope[:, None] * t
    return np.einsum("ij,ij->i", resid, resid)


@dataclass(frozen=True)
class Fluctuation:
    scales: np.ndarray
    F: np.ndarray
    skipped: list[tuple[int, str]] = field(default_factory=list)


def dfa_fluctuation(series, scales=None) -> Fluctuation:
    x = np.asarray(series, dtype=float)
    n = len(x)
    if scales is None:
        scales = default_scales(n)
    y = np.cumsum(x - x.mean())
    kept, values, skipped = [], [], []
    for l in sorted(set(int(s) for s in scales)):
        if l < MIN_SCALE:
            skipped.append((l, f"scale below {MIN_SCALE}"))
            continue
        if 4 * l > n:
            skipped.append((l, "scale exceeds length/4"))
            continue
        k = n // l
        front = y[: k * l].reshape(k, l)
        back = y[n - k * l :].reshape(k, l)
        sse = np.concatenate([_window_sse(front), _window_sse(back)])
        kept.append(l)
        values.append(math.sqrt(math.fsum(sse.tolist()) / (2 * k * l)))
    return Fluctuation(np.array(kept, dtype=int), np.array(values), skipped)


def fit_alpha(scales, F, fit_range: tuple[float, float] | None = None) -> tuple[float, float]:
    """OLS slope of ``log F`` on ``log l`` within ``fit_range``; returns (alpha, stderr)."""
    scales = np.asarray(scales, dtype=float)
    F = np.asarray(F, dtype=float)
    if fit_range is not None:
        m = (scales >= fit_range[0]) & (scales <= fit_range[1])
        scales, F = scales[m], F[m]
    if len(scales) < 4:
        raise FitError(f"need >= 4 scales in range, got {len(scales)}")
    if np.any(F <= 0):
        raise FitError("fluctuation function has nonpositive values")
    return _line(np.log(scales), np.log(F))[:2]


def _line(u: np.ndarray, v: np.ndarray) -> tuple[float, float, float]:
    """Slope, slope stderr and residual SSE of the OLS line of v on u."""
    um, vm = u.mean(), v.mean()
    du = u - um
    suu = du @ du
    slope = (du @ (v - vm)) / suu
    r = v - vm - slope * du
    sse = float(r @ r)
    k = len(u)
    stderr = math.sqrt(sse / (k - 2) / suu) if k > 2 else float("nan")
    return float(slope), stderr, sse


@dataclass(frozen=True)
class Crossover:
    l_x: int
    alpha_small: float
    alpha_large: float
    stderr_small: float
    stderr_large: float
    small_range: tuple[int, int]
    large_range: tuple[int, int]
    sse: float


def detect_crossover(scales, F, min_points: int = 4) -> Crossover:
    """Two-segment least squares in log-log space.

    Every split leaving ``min_points`` scales on each side is tried; the small
    regime is ``scales[:k]`` and the large regime ``scales[k:]`` with
    ``l_x = scales[k]``.  The split with least total SSE wins, the smallest
    ``l_x`` among ties.
    """
    scales = np.asarray(scales, dtype=int)
    F = np.asarray(F, dtype=float)
    if len(scales) < 2 * min_points:
        raise FitError(f"need >= {2 * min_points} scales, got {len(scales)}")
    u, v = np.log(scales.astype(float)), np.log(F)
    best = None
    fits = {}
    for k in range(min_points, len(scales) - min_points + 1):
        s1, e1, r1 = _line(u[:k], v[:k])
        s2, e2, r2 = _line(u[k:], v[k:])
        fits[k] = (s1, e1, s2, e2, r1 + r2)
    total = np.array([fits[k][4] for k in fits])
    tol = 1e-12 * (1.0 + total.min())
    best = min(k for k in fits if fits[k][4] <= total.min() + tol)
    s1, e1, s2, e2, sse = fits[best]
    return Crossover(
        l_x=int(scales[best]),
        alpha_small=s1,
        alpha_large=s2,
        stderr_small=e1,
        stderr_large=e2,
        small_range=(int(scales[0]), int(scales[best - 1])),
        large_range=(int(scales[best]), int(scales[-1])),
        sse=sse,
    )


@dataclass(frozen=True)
class DFAReport:
    scales: np.ndarray
    fluctuation: np.ndarray
    alpha: float
    alpha_stderr: float
    crossover: Crossover | None
    degenerate: bool = False
    skipped: list = field(default_factory=list)

    @property
    def alpha_small(self) -> float:
        return self.crossover.alpha_small if self.crossover else float("nan")

    @property
    def alpha_large(self) -> float:
        return self.crossover.alpha_large if self.crossover else float("nan")

    @property
    def l_x(self) -> int | None:
        return self.crossover.l_x if self.crossover else None

    def as_dict(self) -> dict:
        c = self.crossover
        return {
            "alpha": self.alpha,
            "alpha_stderr": self.alpha_stderr,
            "alpha_small": self.alpha_small,
            "alpha_large": self.alpha_large,
            "l_x": self.l_x,
            "ranges": [list(c.small_range), list(c.large_range)] if c else None,
            "stderr": [c.stderr_small, c.stderr_large] if c else None,
            "degenerate": self.degenerate,
        }


def dfa_report(series, scales=None) -> DFAReport:
    """Fluctuation function, overall exponent and crossover of one series."""
    fl = dfa_fluctuation(series, scales)
    if len(fl.scales) == 0 or np.all(fl.F == 0):
        return DFAReport(fl.scales, fl.F, float("nan"), float("nan"), None, True, fl.skipped)
    if np.any(fl.F <= 0):
        return DFAReport(fl.scales, fl.F, float("nan"), float("nan"), None, True, fl.skipped)
    alpha, err = fit_alpha(fl.scales, fl.F)
    try:
        cross = detect_crossover(fl.scales, fl.F)
    except FitError:
        cross = None
    return DFAReport(fl.scales, fl.F, alpha, err, cross, False, fl.skipped)


def alpha_vs_q(vol: VolatilitySeries, q_grid, min_intervals: int = 512, scales=None):
    """DFA of the interval sequence at each threshold.

    Returns ``(reports, skipped)`` where ``reports`` is a list of ``(q, DFAReport)``
    ordered by q.
    """
    reports, skipped = [], []
    for q in sorted(float(v) for v in q_grid):
        try:
            sample = extract_intervals(vol, q)
        except InsufficientSampleError as exc:
            skipped.append((q, str(exc)))
            continue
        if len(sample) < min_intervals:
            skipped.append((q, f"only {len(sample)} intervals"))
            continue
        reports.append((q, dfa_report(sample.intervals, scales)))
    return reports, skipped
