"""Return intervals between threshold exceedances and their empirical distributions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .errors import InsufficientSampleError, StageError
from .volatility import Stage, VolatilitySeries

DEFAULT_BINS_PER_DECADE = 20


@dataclass(frozen=True)
class IntervalSample:
    """Return intervals for one threshold, in occurrence order.

    Intervals extracted from a volatility series are integers >= 1 (minutes).
    Positive non-integer values are accepted for continuous samples such as
    pre-discretization draws from a fitted distribution.
    """

    q: float
    intervals: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.intervals, dtype=float)
        if tau.ndim != 1:
            raise ValueError("intervals must be one-dimensional")
        if tau.size and not np.all(tau > 0):
            raise ValueError("intervals must be positive")
        object.__setattr__(self, "intervals", tau)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def mean_interval(self) -> float:
        return float(np.mean(self.intervals))

    @property
    def discrete(self) -> bool:
        tau = self.intervals
        return bool(np.all(tau >= 1) and np.all(tau == np.floor(tau)))

    def scaled(self) -> np.ndarray:
        return self.intervals / self.mean_interval


def extract_intervals(vol: VolatilitySeries, q: float) -> IntervalSample:
    """Differences between successive indices whose value strictly exceeds ``q``.

    Indices count trading minutes consecutively, across session and day breaks.
    """
    if vol.stage is not Stage.NORMALIZED:
        raise StageError(f"interval extraction needs a normalized series, got {vol.stage.value}")
    if not q > 0:
        raise ValueError("threshold q must be positive")
    hits = np.flatnonzero(vol.values > q)
    if len(hits) < 2:
        raise InsufficientSampleError(f"fewer than 2 exceedances of q={q}", len(hits))
    return IntervalSample(float(q), np.diff(hits).astype(float))


def exceedance_positions(vol: VolatilitySeries, q: float) -> np.ndarray:
    return np.flatnonzero(vol.values > q)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Log-binned density plus the exact step CDF of one sample.

    ``values`` holds the sorted (scaled or raw) sample behind the CDF.  The PDF
    fields are empty for distributions built by :func:`empirical_cdf`.
    """

    values: np.ndarray
    scaled: bool
    mean_interval: float
    q: float = float("nan")
    x: np.ndarray = field(default_factory=lambda: np.empty(0))
    density: np.ndarray = field(default_factory=lambda: np.empty(0))
    width: np.ndarray = field(default_factory=lambda: np.empty(0))
    counts: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n(self) -> int:
        return len(self.values)

    def cdf(self, x) -> np.ndarray:
        """Right-continuous ECDF."""
        return np.searchsorted(self.values, x, side="right") / self.n

    def cdf_left(self, x) -> np.ndarray:
        """Left limit ``F(x-)`` of the ECDF."""
        return np.searchsorted(self.values, x, side="left") / self.n

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Jump locations and the ECDF value just after each jump."""
        u, idx = np.unique(self.values, return_index=True)
        counts = np.diff(np.append(idx, self.n))
        return u, np.cumsum(counts) / self.n


def _log_edges(lo: float, hi: float, bins_per_decade: int) -> np.ndarray:
    k_lo = int(np.floor(np.log10(lo) * bins_per_decade))
    k_hi = int(np.floor(np.log10(hi) * bins_per_decade)) + 1
    edges = 10.0 ** (np.arange(k_lo, k_hi + 1) / bins_per_decade)
    # guard against rounding at the extreme edges
    while edges[0] > lo:
        k_lo -= 1
        edges = np.insert(edges, 0, 10.0 ** (k_lo / bins_per_decade))
    while edges[-1] <= hi:
        k_hi += 1
        edges = np.append(edges, 10.0 ** (k_hi / bins_per_decade))
    return edges


def _integers_below(edges: np.ndarray, mean_interval: float, vmax: float) -> np.ndarray:
    """Number of integers ``k`` in ``[1, vmax]`` with ``k / mean_interval < edge``.

    Uses the same comparison as the bin assignment of the data, so every integer
    lands in exactly the cell its value would.
    """
    c = np.floor(edges * mean_interval)
    c = np.where(c / mean_interval >= edges, c - 1, c)
    c = np.where((c + 1) / mean_interval < edges, c + 1, c)
    return np.clip(c, 0, np.floor(vmax))


def log_binned_pdf(
    values: np.ndarray,
    mean_interval: float,
    bins_per_decade: int = DEFAULT_BINS_PER_DECADE,
    discrete: bool = False,
):
    """Log-binned density of ``values / mean_interval``.

    Returns ``(x, density, width, counts)`` for occupied bins only.  In discrete
    mode ``values`` are integers; each integer owns a unit cell, so a bin's width is
    the number of integers it contains divided by ``mean_interval`` and ``x`` is the
    mean of those integers, scaled.  Otherwise the width is the geometric bin width
    and ``x`` the geometric bin center.
    """
    if bins_per_decade < 1:
        raise ValueError("bins_per_decade must be >= 1")
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        raise ValueError("empty sample")
    x = values / mean_interval
    edges = _log_edges(x.min(), x.max(), bins_per_decade)
    which = np.searchsorted(edges, x, side="right") - 1
    counts = np.bincount(which, minlength=len(edges) - 1)
    if discrete:
        below = _integers_below(edges, mean_interval, values.max())
        cells = np.diff(below)
        sums = np.diff(below * (below + 1) / 2)
        occ = counts > 0
        width = cells[occ] / mean_interval
        centers = sums[occ] / cells[occ] / mean_interval
    else:
        occ = counts > 0
        width = np.diff(edges)[occ]
        centers = np.sqrt(edges[:-1] * edges[1:])[occ]
    counts = counts[occ]
    density = counts / (n * width)
    return centers, density, width, counts


def empirical_pdf(
    sample: IntervalSample,
    bins_per_decade: int = DEFAULT_BINS_PER_DECADE,
    discrete: bool = False,
    mean_interval: float | None = None,
) -> EmpiricalDistribution:
    """Log-binned PDF of the scaled intervals ``tau / <tau>``.

    ``mean_interval`` overrides the scale (conditional PDFs use the full-sample
    mean).  ``discrete=True`` uses integer-cell bin widths, the right choice for
    interval data whose smallest values are only a few minutes long.
    """
    if len(sample) == 0:
        raise ValueError("empty sample")
    m = sample.mean_interval if mean_interval is None else float(mean_interval)
    if discrete and not sample.discrete:
        raise ValueError("discrete binning needs integer intervals")
    x, density, width, counts = log_binned_pdf(sample.intervals, m, bins_per_decade, discrete)
    return EmpiricalDistribution(
        values=np.sort(sample.intervals / m),
        scaled=True,
        mean_interval=m,
        q=sample.q,
        x=x,
        density=density,
        width=width,
        counts=counts,
    )


def empirical_cdf(
    sample: IntervalSample, scaled: bool = True, mean_interval: float | None = None
) -> EmpiricalDistribution:
    """Exact ECDF of raw intervals, or of ``tau / <tau>`` when ``scaled``."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    m = sample.mean_interval if mean_interval is None else float(mean_interval)
    values = sample.intervals / m if scaled else sample.intervals.copy()
    return EmpiricalDistribution(np.sort(values), scaled, m, sample.q)


def write_intervals(samples: list[IntervalSample], fh: IO[str]) -> None:
    fh.write("q,interval\n")
    for s in samples:
        for tau in s.intervals.tolist():
            fh.write(f"{s.q!r},{int(tau) if float(tau).is_integer() else tau!r}\n")


def read_intervals(fh: IO[str]) -> list[IntervalSample]:
    header = fh.readline().strip()
    if header != "q,interval":
        raise ValueError("expected header q,interval")
    data: dict[float, list[float]] = {}
    for line in fh:
        line = line.strip()
        if not line:
            continue
        q, tau = line.split(",")
        data.setdefault(float(q), []).append(float(tau))
    return [IntervalSample(q, np.array(v)) for q, v in data.items()]


def write_pdf(dists: list[EmpiricalDistribution], fh: IO[str]) -> None:
    fh.write("q,x,density\n")
    for d in dists:
        for x, p in zip(d.x.tolist(), d.density.tolist()):
            fh.write(f"{d.q!r},{x!r},{p!r}\n")


def write_cdf(dists: list[EmpiricalDistribution], fh: IO[str]) -> None:
    fh.write("q,x,F\n")
    for d in dists:
        u, f = d.steps()
        for x, p in zip(u.tolist(), f.tolist()):
            fh.write(f"{d.q!r},{x!r},{p!r}\n")
