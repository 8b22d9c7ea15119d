"""Two-sample KS scaling test and parametric-bootstrap goodness of fit.

The scaling test compares the ECDFs of two scaled interval samples on the
intersection of their supports and rejects when ``KS >= c_alpha sqrt((m+n)/(mn))``.

The goodness-of-fit test measures the distance between a sample's ECDF and the
CDF of its own stretched-exponential fit (plain ``KS`` or edge-weighted ``KSW``),
then calibrates it by refitting synthetic samples drawn from that fit.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError, DisjointSupportError, FitError, ProcedureError
from .intervals import (
    DEFAULT_BINS_PER_DECADE,
    EmpiricalDistribution,
    IntervalSample,
    empirical_cdf,
)
from .stretchedexp import StretchedExpFit, fit_sample, se_cdf_closed, se_draw

# Two-sample Smirnov coefficients by significance level.
C_ALPHA = {0.05: 1.36}

KSW_EDGE = 1e-12
MAX_DISCARD_FRACTION = 0.05


class Verdict(str, enum.Enum):
    SCALING = "scaling"
    NO_SCALING = "no_scaling"


def verdict(ks: float, cv: float) -> Verdict:
    return Verdict.SCALING if ks < cv else Verdict.NO_SCALING


def critical_value(m: int, n: int, alpha: float = 0.05) -> float:
    """``c_alpha / sqrt(mn / (m + n))``."""
    if m < 1 or n < 1:
        raise ValueError("sample sizes must be >= 1")
    try:
        c = C_ALPHA[round(float(alpha), 10)]
    except KeyError:
        raise ConfigurationError(
            f"unsupported significance {alpha}; supported: {sorted(C_ALPHA)}"
        ) from None
    return c * math.sqrt((m + n) / (m * n))


def overlap(a: EmpiricalDistribution, b: EmpiricalDistribution) -> tuple[float, float]:
    lo = max(a.values[0], b.values[0])
    hi = min(a.values[-1], b.values[-1])
    if lo > hi:
        raise DisjointSupportError(f"supports do not overlap ({lo} > {hi})")
    return float(lo), float(hi)


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """``sup |F_a - F_b|`` over the overlap of the two supports.

    Both ECDFs are step functions, so the supremum is attained at a jump point,
    either at the jump itself or just before it.  Left limits are only taken for
    jumps strictly inside the overlap.
    """
    lo, hi = overlap(a, b)
    pts = np.union1d(a.values, b.values)
    pts = pts[(pts >= lo) & (pts <= hi)]
    right = np.abs(a.cdf(pts) - b.cdf(pts))
    inner = pts[pts > lo]
    left = np.abs(a.cdf_left(inner) - b.cdf_left(inner))
    return float(max(right.max(initial=0.0), left.max(initial=0.0)))


@dataclass(frozen=True)
class KSReport:
    ks: float
    cv: float
    verdict: Verdict
    m: int
    n: int
    overlap: tuple[float, float]
    q_pair: tuple[float, float] = (float("nan"), float("nan"))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d["overlap"] = list(self.overlap)
        d["q_pair"] = list(self.q_pair)
        return d


def compare(a: EmpiricalDistribution, b: EmpiricalDistribution, alpha: float = 0.05) -> KSReport:
    ks = ks_two_sample(a, b)
    cv = critical_value(a.n, b.n, alpha)
    return KSReport(ks, cv, verdict(ks, cv), a.n, b.n, overlap(a, b), (a.q, b.q))


def scaling_test(
    sample_a: IntervalSample, sample_b: IntervalSample, alpha: float = 0.05
) -> KSReport:
    """Each sample scaled by its own mean interval, then compared."""
    return compare(empirical_cdf(sample_a, scaled=True), empirical_cdf(sample_b, scaled=True), alpha)


class StatisticKind(str, enum.Enum):
    KS = "KS"
    KSW = "KSW"


def _gof_both(values: np.ndarray, fit: StretchedExpFit) -> tuple[float, float]:
    """(KS, KSW) of sorted scaled values against the fit's CDF."""
    n = len(values)
    u, first = np.unique(values, return_index=True)
    f_left = first / n
    f_right = np.append(first[1:], n) / n
    f = se_cdf_closed(fit, u)
    dev = np.maximum(np.abs(f_right - f), np.abs(f_left - f))
    ks = float(dev.max())
    keep = (f > KSW_EDGE) & (f < 1 - KSW_EDGE)
    if keep.any():
        fk = f[keep]
        ksw = float((dev[keep] / np.sqrt(fk * (1 - fk))).max())
    else:
        ksw = float("nan")
    return ks, ksw


def ks_gof(sample: IntervalSample, fit: StretchedExpFit, weighted: bool = False) -> float:
    """Distance between the scaled-sample ECDF and the fitted SE CDF.

    Evaluated at every empirical jump, on both sides of the step.  The weighted
    form divides by ``sqrt(F(1-F))``; points where the model CDF is within 1e-12
    of 0 or 1 are skipped.
    """
    if len(sample) == 0:
        raise ValueError("empty sample")
    values = np.sort(sample.scaled())
    ks, ksw = _gof_both(values, fit)
    return ksw if weighted else ks


@dataclass(frozen=True)
class GofReport:
    statistic_kind: StatisticKind
    observed: float
    p_value: float
    replicas: int
    seed: int
    discarded: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["statistic_kind"] = self.statistic_kind.value
        return d


def _replica_stats(args) -> list[tuple[float, float] | None]:
    fit, n, mean_interval, discretize, bins_per_decade, seed, indices = args
    out = []
    for i in indices:
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        tau = se_draw(fit, n, rng) * mean_interval
        tau = np.maximum(np.ceil(tau), 1.0) if discretize else np.maximum(tau, np.finfo(float).tiny)
        sim = IntervalSample(fit.q, tau)
        try:
            sim_fit = fit_sample(sim, bins_per_decade)
        except FitError:
            out.append(None)
            continue
        out.append(_gof_both(np.sort(sim.scaled()), sim_fit))
    return out


def bootstrap_gof(
    sample: IntervalSample,
    replicas: int = 1000,
    rng_seed: int = 0,
    bins_per_decade: int = DEFAULT_BINS_PER_DECADE,
    fit: StretchedExpFit | None = None,
    workers: int = 1,
) -> dict[StatisticKind, GofReport]:
    """Parametric bootstrap p-values for both KS and KSW.

    Replica ``i`` draws ``len(sample)`` scaled values from the fit, rescales them
    by the sample's mean interval (rounding up to whole minutes for integer data),
    refits its own SE and measures its distance to that refit.  Each replica owns
    the random stream ``SeedSequence([rng_seed, i])``, so results do not depend on
    ``workers``.  ``p = #(sim > observed) / accepted replicas``.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if fit is None:
        fit = fit_sample(sample, bins_per_decade)
    observed = _gof_both(np.sort(sample.scaled()), fit)
    base = (fit, len(sample), sample.mean_interval, sample.discrete, bins_per_decade, int(rng_seed))
    if workers > 1:
        chunks = np.array_split(np.arange(replicas), workers * 4)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_replica_stats, [base + (c.tolist(),) for c in chunks])
            results = [r for part in parts for r in part]
    else:
        results = _replica_stats(base + (range(replicas),))
    good = [r for r in results if r is not None]
    discarded = replicas - len(good)
    if discarded > MAX_DISCARD_FRACTION * replicas:
        raise ProcedureError(f"{discarded} of {replicas} bootstrap refits failed")
    sims = np.array(good, dtype=float).reshape(-1, 2)
    reports = {}
    for j, kind in enumerate(StatisticKind):
        obs = observed[j]
        p = float(np.sum(sims[:, j] > obs) / len(sims)) if len(sims) else float("nan")
        reports[kind] = GofReport(kind, obs, p, replicas, int(rng_seed), discarded)
    return reports


def bootstrap_pvalue(
    sample: IntervalSample,
    replicas: int = 1000,
    statistic_kind: StatisticKind | str = StatisticKind.KS,
    rng_seed: int = 0,
    bins_per_decade: int = DEFAULT_BINS_PER_DECADE,
    workers: int = 1,
) -> GofReport:
    kind = StatisticKind(statistic_kind)
    return bootstrap_gof(sample, replicas, rng_seed, bins_per_decade, workers=workers)[kind]
