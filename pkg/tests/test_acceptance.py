"""Acceptance suite: one test per criterion, each printed as PASS/FAIL in the summary."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from rvintervals.cli import main
from rvintervals.dfa import alpha_vs_q, detect_crossover, dfa_fluctuation, fit_alpha
from rvintervals.errors import DisjointSupportError
from rvintervals.intervals import IntervalSample, empirical_cdf, extract_intervals
from rvintervals.ksframework import (
    StatisticKind,
    Verdict,
    bootstrap_gof,
    compare,
    critical_value,
    ks_two_sample,
    scaling_test,
    verdict,
)
from rvintervals.memorydiag import quartile_partition, shuffle_surrogate, successors
from rvintervals.stretchedexp import (
    StretchedExpFit,
    fit_sample,
    for_unit_mean,
    gamma_vs_q,
    se_cdf,
    se_draw,
    se_sample,
)
from rvintervals.synthgen import TickPathSpec, gen_fgn, gen_longmemory_volatility, gen_tick_path, gen_white_noise
from rvintervals.volatility import prepare, write_ticks, write_volatility

FIXTURES = Path(__file__).parent / "fixtures"
Q_GRID = (2.0, 3.0, 4.0, 5.0)


def test_01_verdict_fixture(acceptance):
    with open(FIXTURES / "scaling_verdicts.csv") as fh:
        rows = list(csv.DictReader(fh))
    wrong = [r for r in rows if (verdict(float(r["ks"]), float(r["cv"])) is Verdict.SCALING) != (r["scaling"] == "Yes")]
    acceptance("1 verdict fixture", len(rows) == 46 and not wrong, f"{len(rows) - len(wrong)}/{len(rows)} rows reproduced")


def test_02_critical_value(acceptance):
    cv = critical_value(1000, 1000, 0.05)
    acceptance("2 critical value", abs(cv - 0.06082) <= 1e-5, f"CV(1000,1000)={cv:.6f}, target 0.06082 +- 1e-5")


def test_03_ks_calibration(acceptance):
    fit = for_unit_mean(0.3)
    rng = np.random.default_rng(303)
    trials, n = 1000, 10_000
    rejects = 0
    for _ in range(trials):
        a = IntervalSample(2.0, se_draw(fit, n, rng))
        b = IntervalSample(2.0, se_draw(fit, n, rng))
        rep = compare(empirical_cdf(a, scaled=False), empirical_cdf(b, scaled=False))
        rejects += rep.verdict is Verdict.NO_SCALING
    rate = rejects / trials
    acceptance("3 KS calibration", 0.03 <= rate <= 0.07, f"rejection rate {rate:.3f}, target [0.03, 0.07]")


def brute_ks(a, b):
    """|F_a - F_b| probed at every jump and every midpoint inside the overlap."""
    lo, hi = max(a.min(), b.min()), min(a.max(), b.max())
    pts = np.unique(np.concatenate([a, b]))
    pts = pts[(pts >= lo) & (pts <= hi)]
    probes = np.concatenate([pts, 0.5 * (pts[1:] + pts[:-1])])
    best = 0.0
    for x in probes:
        fa = sum(v <= x for v in a) / len(a)
        fb = sum(v <= x for v in b) / len(b)
        best = max(best, abs(fa - fb))
    return best


def test_04_ks_oracle(acceptance):
    rng = np.random.default_rng(404)
    worst, done = 0.0, 0
    while done < 200:
        m, n = rng.integers(1, 51, 2)
        if rng.random() < 0.5:
            a, b = rng.integers(1, 25, m).astype(float), rng.integers(1, 25, n).astype(float)
        else:
            a, b = rng.exponential(1.0, m), rng.exponential(rng.uniform(0.5, 2.0), n)
        try:
            got = ks_two_sample(
                empirical_cdf(IntervalSample(2.0, a), scaled=False), empirical_cdf(IntervalSample(2.0, b), scaled=False)
            )
        except DisjointSupportError:
            continue
        worst = max(worst, abs(got - brute_ks(a, b)))
        done += 1
    acceptance("4 KS oracle", worst < 1e-12, f"max deviation {worst:.2e} over 200 instances, tol 1e-12")


def test_05_se_recovery(acceptance):
    counts = {}
    for g in (0.2, 0.3, 0.5, 1.0):
        fit = for_unit_mean(g)
        good = 0
        for k in range(100):
            s = se_sample(fit, 100_000, [505, int(round(10 * g)), k], mean_interval=1.0, discretize=False)
            good += abs(fit_sample(s).gamma - g) < 0.05
        counts[g] = good
    detail = ", ".join(f"gamma={g}: {c}/100" for g, c in counts.items())
    acceptance("5 SE fit recovery", all(c >= 95 for c in counts.values()), detail + " (need >= 95)")


def test_06_cdf_oracle(acceptance):
    x = np.concatenate([[0.0], np.geomspace(1e-4, 50, 50)])
    worst = 0.0
    for g in np.linspace(0.2, 1.5, 8):
        for a in np.geomspace(0.5, 10, 6):
            fit = StretchedExpFit(a=a, b=1.0, gamma=g)
            worst = max(worst, float(np.max(np.abs(se_cdf(fit, x) - special.gammainc(1 / g, a * x**g)))))
    acceptance("6 SE CDF oracle", worst < 1e-8, f"max abs error {worst:.2e}, tol 1e-8")


def test_07_bootstrap_self_consistency(acceptance):
    # a fit of real-looking data, then fresh data drawn from that fit
    source = se_sample(for_unit_mean(0.3, 12.0), 20_000, 707)
    fitted = fit_sample(source)
    rows = []
    for label, discretize, mean in (("continuous", False, 1.0), ("whole-minute", True, source.mean_interval)):
        passes = 0
        for k in range(100):
            s = se_sample(fitted, 2000, [707, int(discretize), k], mean_interval=mean, discretize=discretize)
            passes += bootstrap_gof(s, 1000, rng_seed=k)[StatisticKind.KS].p_value > 0.05
        rows.append((label, passes))
    detail = ", ".join(f"{label}: {p}/100" for label, p in rows) + " with p > 0.05 (need >= 90)"
    acceptance("7 bootstrap self-consistency", all(p >= 90 for _, p in rows), detail)


def brute_F(x, l):
    x = np.asarray(x, dtype=float)
    n = len(x)
    y = np.cumsum(x - x.mean())
    k = n // l
    t = np.arange(l)
    total = 0.0
    for start in [i * l for i in range(k)] + [n - (i + 1) * l for i in range(k)]:
        w = y[start : start + l]
        total += np.sum((w - np.polyval(np.polyfit(t, w, 1), t)) ** 2)
    return math.sqrt(total / (2 * k * l))


def test_08_dfa_recovery(acceptance):
    scales = np.unique(np.geomspace(16, 2**14, 20).astype(int))
    fl = dfa_fluctuation(gen_white_noise(2**17, seed=808), scales)
    white = fit_alpha(fl.scales, fl.F)[0]
    fgn = {}
    for H in (0.6, 0.7, 0.8, 0.9):
        fl = dfa_fluctuation(gen_fgn(H, 2**17, seed=int(H * 100)), scales)
        fgn[H] = fit_alpha(fl.scales, fl.F)[0]
    rng = np.random.default_rng(808)
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(64, 2049))
        x = rng.standard_normal(n).cumsum()
        fl = dfa_fluctuation(x, sorted(set(rng.integers(4, n // 4 + 1, 5).tolist())))
        for l, f in zip(fl.scales, fl.F):
            worst = max(worst, abs(f - brute_F(x, l)) / max(1.0, f))
    ok = abs(white - 0.5) <= 0.03 and all(abs(a - H) < 0.05 for H, a in fgn.items()) and worst <= 1e-10
    detail = f"white {white:.3f}; " + ", ".join(f"H={H}: {a:.3f}" for H, a in fgn.items()) + f"; oracle {worst:.1e}"
    acceptance("8 DFA recovery", ok, detail)


def test_09_crossover(acceptance):
    scales = np.unique(np.round(np.geomspace(8, 8192, 25)).astype(int))
    target = int(np.argmin(np.abs(np.log(scales / 256))))
    worst_step, worst_slope = 0, 0.0
    for k in range(20):
        rng = np.random.default_rng([909, k])
        F = np.where(scales <= 256, scales**0.7, 256**-0.3 * scales**1.0) * np.exp(rng.normal(0, 0.005, len(scales)))
        c = detect_crossover(scales, F)
        worst_step = max(worst_step, abs(int(np.flatnonzero(scales == c.l_x)[0]) - target))
        worst_slope = max(worst_slope, abs(c.alpha_small - 0.7), abs(c.alpha_large - 1.0))
    ok = worst_step <= 1 and worst_slope <= 0.02
    acceptance("9 crossover", ok, f"worst scale offset {worst_step} step(s), worst slope error {worst_slope:.4f}")


def test_10_shuffled_control(acceptance):
    base = prepare(gen_longmemory_volatility(0.85, 2**17, seed=1010))
    alphas = {q: [] for q in Q_GRID}
    same, total = 0, 0
    for k in range(10):
        vol = shuffle_surrogate(base, [1010, k])
        for q, rep in alpha_vs_q(vol, Q_GRID)[0]:
            alphas[q].append(rep.alpha)
        s = extract_intervals(vol, 2.0)
        part = quartile_partition(s)
        cdfs = [empirical_cdf(successors(s, j, part), mean_interval=s.mean_interval) for j in (1, 2, 3, 4)]
        for i in range(4):
            for j in range(i + 1, 4):
                same += compare(cdfs[i], cdfs[j]).verdict is Verdict.SCALING
                total += 1
    mean_alpha = {q: float(np.mean(v)) for q, v in alphas.items()}
    ok = all(len(v) == 10 for v in alphas.values())
    ok &= all(abs(a - 0.5) <= 0.05 for a in mean_alpha.values()) and same >= 0.9 * total
    detail = ", ".join(f"q={q:g}: {a:.3f}" for q, a in mean_alpha.items())
    acceptance("10 shuffled control", ok, f"alpha {detail}; quartile pairs indistinguishable {same}/{total}")


@pytest.fixture(scope="module")
def longmemory_runs():
    return [prepare(gen_longmemory_volatility(0.85, 2**17, seed=1100 + k)) for k in range(20)]


def test_11a_scaling_verdict(acceptance, longmemory_runs):
    reps = [scaling_test(extract_intervals(v, 2.0), extract_intervals(v, 5.0)) for v in longmemory_runs]
    hits = sum(r.verdict is Verdict.SCALING for r in reps)
    ks = np.median([r.ks for r in reps])
    cv = np.median([r.cv for r in reps])
    acceptance(
        "11a scaling q=2 vs 5", hits >= 16, f"{hits}/20 scaling (need >= 16); median KS {ks:.3f} vs CV {cv:.3f}"
    )


def test_11b_gamma_flat(acceptance, longmemory_runs):
    g = np.array([[f.gamma for _, f in gamma_vs_q(v, Q_GRID).fits] for v in longmemory_runs])
    mean_q = g.mean(axis=0)
    spread = float(np.max(np.abs(mean_q - mean_q.mean())))
    ok = g.shape == (20, 4) and np.all(g < 1) and spread <= 0.08
    detail = "mean gamma " + ", ".join(f"{x:.3f}" for x in mean_q) + f"; max deviation from level {spread:.3f}"
    acceptance("11b gamma < 1 and flat", ok, detail)


def test_11c_conditional_ordering(acceptance, longmemory_runs):
    z = []
    for v in longmemory_runs:
        s = extract_intervals(v, 2.0)
        part = quartile_partition(s)
        a = successors(s, 1, part).intervals
        b = successors(s, 4, part).intervals
        # share of successors in the smallest cell (one minute)
        p1, p4 = float(np.mean(a == 1)), float(np.mean(b == 1))
        z.append((p1 - p4) / math.sqrt(p1 * (1 - p1) / len(a) + p4 * (1 - p4) / len(b)))
    acceptance("11c Q1 above Q4 at small tau", min(z) > 3, f"smallest margin {min(z):.1f} sigma over 20 runs")


def test_11d_alpha_trend(acceptance, longmemory_runs):
    a = np.array([[r.alpha for _, r in alpha_vs_q(v, Q_GRID)[0]] for v in longmemory_runs])
    mean_q = a.mean(axis=0)
    slope = float(np.polyfit(Q_GRID, mean_q, 1)[0])
    ok = a.shape == (20, 4) and np.all(mean_q > 0.5) and slope <= 0
    detail = "mean alpha " + ", ".join(f"{x:.3f}" for x in mean_q) + f"; slope in q {slope:+.4f}"
    acceptance("11d alpha > 0.5, nonincreasing", ok, detail)


def read_bundle(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_12_determinism(acceptance, tmp_path, monkeypatch):
    monkeypatch.delenv("RVINTERVALS_OUTPUT", raising=False)
    ticks, vol = tmp_path / "ticks.csv", tmp_path / "lm.csv"
    with open(ticks, "w") as fh:
        write_ticks(gen_tick_path(TickPathSpec(days=60, seed=12)), fh)
    with open(vol, "w") as fh:
        write_volatility(gen_longmemory_volatility(0.85, 2**17, seed=12), fh)
    codes = [
        main(["run-all", str(ticks), str(vol), "--shuffled-control", "--seed", "12", "--output", str(tmp_path / d)])
        for d in ("a", "b")
    ]
    a, b = read_bundle(tmp_path / "a"), read_bundle(tmp_path / "b")
    ok = codes == [0, 0] and len(a) > 0 and a == b
    ok &= json.loads(a["report.json"])["config"]["replicas"] == 1000
    acceptance("12 determinism", ok, f"{len(a)} files, byte-identical: {a == b}, exit codes {codes}")
