"""Short-term memory diagnostics: interval PDFs conditioned on the preceding interval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSampleError
from .intervals import (
    DEFAULT_BINS_PER_DECADE,
    EmpiricalDistribution,
    IntervalSample,
    empirical_pdf,
)
from .volatility import VolatilitySeries

MIN_SUCCESSORS = 10


@dataclass(frozen=True)
class QuartilePartition:
    """Rank-based split of the intervals into four equal-size bins.

    ``labels[i]`` in 1..4 is the quartile of interval ``i``;
    ``edges`` are the largest values of quartiles 1..3.
    """

    edges: tuple[float, float, float]
    labels: np.ndarray


def quartile_partition(sample: IntervalSample) -> QuartilePartition:
    n = len(sample)
    if n < 8:
        raise InsufficientSampleError("quartile partition needs >= 8 intervals", n)
    order = np.argsort(sample.intervals, kind="stable")
    labels = np.empty(n, dtype=int)
    labels[order] = 4 * np.arange(n) // n + 1
    sorted_tau = sample.intervals[order]
    last = [int(np.flatnonzero(labels[order] == k)[-1]) for k in (1, 2, 3)]
    return QuartilePartition(tuple(float(sorted_tau[i]) for i in last), labels)


def successors(
    sample: IntervalSample, quartile: int, partition: QuartilePartition | None = None
) -> IntervalSample:
    """Intervals that immediately follow an interval of the given quartile."""
    if quartile not in (1, 2, 3, 4):
        raise ValueError("quartile must be 1, 2, 3 or 4")
    partition = partition or quartile_partition(sample)
    prev = np.flatnonzero(partition.labels[:-1] == quartile)
    return IntervalSample(sample.q, sample.intervals[prev + 1])


def conditional_pdf(
    sample: IntervalSample,
    quartile: int,
    bins_per_decade: int = DEFAULT_BINS_PER_DECADE,
    discrete: bool = False,
    partition: QuartilePartition | None = None,
) -> EmpiricalDistribution:
    """Log-binned PDF of successors of quartile-``quartile`` intervals.

    Scaled by the full-sample mean interval so all four curves share one axis.
    """
    succ = successors(sample, quartile, partition)
    if len(succ) < MIN_SUCCESSORS:
        raise InsufficientSampleError(f"quartile {quartile} has too few successors", len(succ))
    return empirical_pdf(succ, bins_per_decade, discrete=discrete, mean_interval=sample.mean_interval)


@dataclass(frozen=True)
class ConditionalPdfSet:
    q: float
    quartile_edges: tuple[float, float, float]
    pdfs: dict[int, EmpiricalDistribution]


def conditional_pdfs(
    sample: IntervalSample,
    bins_per_decade: int = DEFAULT_BINS_PER_DECADE,
    discrete: bool = False,
    quartiles=(1, 2, 3, 4),
) -> ConditionalPdfSet:
    part = quartile_partition(sample)
    pdfs = {k: conditional_pdf(sample, k, bins_per_decade, discrete, part) for k in quartiles}
    return ConditionalPdfSet(sample.q, part.edges, pdfs)


def shuffle_surrogate(vol: VolatilitySeries, rng_seed=None) -> VolatilitySeries:
    """Random permutation of the values; labels and stage are kept in place."""
    if len(vol) == 0:
        raise ValueError("empty volatility series")
    rng = np.random.default_rng(rng_seed)
    return vol.with_values(rng.permutation(vol.values))


def write_conditional(sets: list[ConditionalPdfSet], fh) -> None:
    fh.write("q,quartile,x,density\n")
    for s in sets:
        for k, d in sorted(s.pdfs.items()):
            for x, p in zip(d.x.tolist(), d.density.tolist()):
                fh.write(f"{s.q!r},{k},{x!r},{p!r}\n")
