"""End-to-end analysis per instrument, with JSON reports and plot-ready CSVs.

Output layout under ``config.output``::

    report.json            header (config, hash, version), per-instrument status
    index.json             figure/table -> file mapping
    cross_stock.json       pairwise scaled-interval KS at one threshold
    <instrument>/          one directory per instrument, written atomically
"""

from __future__ import annotations

import io
import json
import math
import os
import shutil
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .dfa import DFAReport, dfa_report
from .errors import AnalysisError
from .intervals import (
    IntervalSample,
    empirical_cdf,
    empirical_pdf,
    extract_intervals,
    write_cdf,
    write_intervals,
    write_pdf,
)
from .ksframework import bootstrap_gof, compare, scaling_test
from .memorydiag import conditional_pdfs, shuffle_surrogate, write_conditional
from .stretchedexp import fit_sample
from .volatility import (
    Stage,
    VolatilitySeries,
    minute_close_volatility,
    parse_sessions,
    parse_ticks,
    prepare,
    read_volatility,
    realized_volatility,
    write_volatility,
)

# result kind -> file relative to an instrument directory
RESULT_FILES = {
    "interval_pdfs": "interval_pdf.csv",
    "scaling_test": "scaling_test.json",
    "gamma_vs_q": "gamma_vs_q.csv",
    "goodness_of_fit": "gof.json",
    "conditional_pdfs": "conditional_pdf.csv",
    "dfa_volatility": "dfa_volatility.csv",
    "dfa_intervals": "dfa_intervals.csv",
    "alpha_vs_q": "alpha_vs_q.csv",
}
SUPPORT_FILES = {
    "volatility": "volatility.csv",
    "intervals": "intervals.csv",
    "interval_cdfs": "cdf.csv",
    "se_fits": "fits.json",
    "instrument_report": "report.json",
}
CROSS_STOCK_FILE = "cross_stock.json"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


@dataclass
class InstrumentResult:
    name: str
    samples: dict[float, IntervalSample] = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def load_volatility(path: str | os.PathLike, config: RunConfig) -> VolatilitySeries:
    """Raw volatility from a tick CSV, or straight from a volatility CSV."""
    with open(path, "rb") as fh:
        head = fh.readline().decode("utf-8", "replace").strip().lower()
    if head.startswith("day,minute,value,stage"):
        return read_volatility(path)
    ticks = parse_ticks(path, parse_sessions(config.sessions), config.drop_out_of_session)
    build = realized_volatility if config.volatility == "R2" else minute_close_volatility
    return build(ticks)


def _dfa_rows(report: DFAReport, q=None):
    for l, f in zip(report.scales.tolist(), report.fluctuation.tolist()):
        yield (l, f) if q is None else (q, l, f)


def analyze_volatility(name: str, raw: VolatilitySeries, config: RunConfig) -> tuple[InstrumentResult, dict[str, str]]:
    """Run every stage on one series; returns the result and file contents.

    Stage failures are recorded in ``result.errors`` and the remaining stages
    still run where their inputs exist.
    """
    res = InstrumentResult(name)
    out: dict[str, str] = {}
    rep: dict = {"instrument": name, "n_minutes": len(raw)}

    try:
        vol = raw if raw.stage is Stage.NORMALIZED else prepare(raw)
    except AnalysisError as exc:
        res.errors.append(f"volatility: {exc}")
        res.report = rep
        return res, out
    rep["gaps"] = [list(g) for g in raw.gaps]
    buf = io.StringIO()
    write_volatility(vol, buf)
    out[SUPPORT_FILES["volatility"]] = buf.getvalue()

    for q in config.q:
        try:
            res.samples[q] = extract_intervals(vol, q)
        except AnalysisError as exc:
            res.errors.append(f"intervals q={q}: {exc}")
    samples = [res.samples[q] for q in config.q if q in res.samples]
    rep["intervals"] = {
        repr(s.q): {"count": len(s), "mean_interval": s.mean_interval} for s in samples
    }
    pdfs, cdfs = [], []
    for s in samples:
        pdfs.append(empirical_pdf(s, config.bins_per_decade, discrete=s.discrete))
        cdfs.append(empirical_cdf(s, scaled=True))
    for fname, writer, data in (
        (SUPPORT_FILES["intervals"], write_intervals, samples),
        (RESULT_FILES["interval_pdfs"], write_pdf, pdfs),
        (SUPPORT_FILES["interval_cdfs"], write_cdf, cdfs),
    ):
        buf = io.StringIO()
        writer(data, buf)
        out[fname] = buf.getvalue()

    qa, qb = config.scaling_pair
    try:
        ks = scaling_test(res.samples[qa], res.samples[qb], config.alpha)
        rep["scaling_test"] = ks.as_dict()
        out[RESULT_FILES["scaling_test"]] = dumps(ks.as_dict())
    except KeyError:
        res.errors.append(f"scaling test: no sample for q pair {qa}, {qb}")
    except AnalysisError as exc:
        res.errors.append(f"scaling test: {exc}")

    fits = {}
    rows = ["q,gamma,gamma_stderr"]
    for s in samples:
        if len(s) < 100:
            rep.setdefault("notes", []).append(f"fit q={s.q} skipped: {len(s)} intervals")
            continue
        try:
            fit = fit_sample(s, config.bins_per_decade)
        except AnalysisError as exc:
            res.errors.append(f"fit q={s.q}: {exc}")
            continue
        fits[s.q] = fit
        rows.append(f"{s.q!r},{fit.gamma!r},{fit.gamma_stderr!r}")
    out[RESULT_FILES["gamma_vs_q"]] = "\n".join(rows) + "\n"
    rep["fits"] = [f.as_dict() for f in fits.values()]
    out[SUPPORT_FILES["se_fits"]] = dumps(rep["fits"])

    gof = []
    for q in config.gof_q:
        if q not in fits:
            continue
        try:
            reps = bootstrap_gof(
                res.samples[q],
                config.replicas,
                rng_seed=config.seed + int(round(1000 * q)),
                bins_per_decade=config.bins_per_decade,
                fit=fits[q],
                workers=config.workers,
            )
        except AnalysisError as exc:
            res.errors.append(f"gof q={q}: {exc}")
            continue
        for r in reps.values():
            gof.append({"q": q, **r.as_dict()})
    rep["goodness_of_fit"] = gof
    out[RESULT_FILES["goodness_of_fit"]] = dumps(gof)

    cond_sets = []
    for s in samples:
        try:
            cond_sets.append(conditional_pdfs(s, config.bins_per_decade, discrete=s.discrete))
        except AnalysisError as exc:
            rep.setdefault("notes", []).append(f"conditional q={s.q}: {exc}")
    rep["conditional_quartile_edges"] = {repr(c.q): list(c.quartile_edges) for c in cond_sets}
    buf = io.StringIO()
    write_conditional(cond_sets, buf)
    out[RESULT_FILES["conditional_pdfs"]] = buf.getvalue()

    try:
        vdfa = dfa_report(vol.values)
        rep["dfa_volatility"] = vdfa.as_dict()
        out[RESULT_FILES["dfa_volatility"]] = "l,F\n" + "".join(
            f"{l},{f!r}\n" for l, f in _dfa_rows(vdfa)
        )
    except (AnalysisError, ValueError) as exc:
        res.errors.append(f"dfa volatility: {exc}")

    dfa_lines = ["q,l,F"]
    alpha_lines = ["q,alpha,alpha_stderr,alpha_small,alpha_large,l_x"]
    rep["dfa_intervals"] = {}
    for s in samples:
        if len(s) < 2**9:
            rep.setdefault("notes", []).append(f"interval dfa q={s.q} skipped: {len(s)} intervals")
            continue
        r = dfa_report(s.intervals)
        rep["dfa_intervals"][repr(s.q)] = r.as_dict()
        dfa_lines.extend(f"{q!r},{l},{f!r}" for q, l, f in _dfa_rows(r, s.q))
        alpha_lines.append(
            f"{s.q!r},{r.alpha!r},{r.alpha_stderr!r},{r.alpha_small!r},{r.alpha_large!r},"
            f"{'' if r.l_x is None else r.l_x}"
        )
    out[RESULT_FILES["dfa_intervals"]] = "\n".join(dfa_lines) + "\n"
    out[RESULT_FILES["alpha_vs_q"]] = "\n".join(alpha_lines) + "\n"

    rep["errors"] = list(res.errors)
    res.report = rep
    out[SUPPORT_FILES["instrument_report"]] = dumps(rep)
    res.files = {k: v for k, v in {**RESULT_FILES, **SUPPORT_FILES}.items() if v in out}
    return res, out


def _write_atomic(root: Path, name: str, files: dict[str, str]) -> None:
    tmp = root / f".{name}.tmp"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    for fname, text in files.items():
        (tmp / fname).write_text(text)
    final = root / name
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def cross_stock_collapse(results: list[InstrumentResult], q: float, alpha: float = 0.05) -> list[dict]:
    """Pairwise two-sample KS of scaled intervals at threshold ``q``."""
    have = [r for r in results if q in r.samples]
    rows = []
    for i, a in enumerate(have):
        for b in have[i + 1 :]:
            rep = compare(empirical_cdf(a.samples[q]), empirical_cdf(b.samples[q]), alpha)
            rows.append({"a": a.name, "b": b.name, "q": q, **rep.as_dict()})
    return rows


def instrument_name(path: str) -> str:
    return Path(path).stem


def run_analysis(config: RunConfig, sources: dict[str, VolatilitySeries] | None = None) -> dict:
    """Analyze every input and write the report bundle.

    ``sources`` adds in-memory raw series (name -> series) next to the file
    inputs.  Returns the top-level report; ``report["ok"]`` is false when any
    instrument hit an error.
    """
    root = Path(config.output)
    root.mkdir(parents=True, exist_ok=True)
    series: list[tuple[str, VolatilitySeries | None, str | None]] = []
    for path in config.inputs:
        try:
            series.append((instrument_name(path), load_volatility(path, config), None))
        except (AnalysisError, OSError) as exc:
            series.append((instrument_name(path), None, f"load: {exc}"))
    for name, vol in (sources or {}).items():
        series.append((name, vol, None))
    if config.shuffled_control:
        extra = []
        for k, (name, vol, err) in enumerate(series):
            if vol is not None:
                extra.append((f"{name}__shuffled", shuffle_surrogate(vol, [config.seed, k]), None))
        series.extend(extra)

    results = []
    for name, vol, err in series:
        if vol is None:
            results.append(InstrumentResult(name, errors=[err]))
            continue
        try:
            res, files = analyze_volatility(name, vol, config)
        except Exception as exc:  # keep completed instruments on unexpected failures
            res, files = InstrumentResult(name, errors=[f"internal: {exc!r}"]), {}
            res.report = {"traceback": traceback.format_exc()}
        if files:
            _write_atomic(root, name, files)
        results.append(res)

    cross = cross_stock_collapse(results, config.cross_stock_q, config.alpha)
    (root / CROSS_STOCK_FILE).write_text(dumps(cross))

    index = {
        "per_instrument": {**RESULT_FILES, **SUPPORT_FILES},
        "cross_stock": CROSS_STOCK_FILE,
        "instruments": {r.name: r.name + "/" for r in results if r.files},
    }
    (root / "index.json").write_text(dumps(index))
    report = {
        "artifact_version": __version__,
        "config": config.as_dict(),
        "config_hash": config.digest(),
        "seed": config.seed,
        "instruments": {
            r.name: {"ok": r.ok, "errors": r.errors, "scaling_test": r.report.get("scaling_test")}
            for r in results
        },
        "ok": all(r.ok for r in results),
    }
    report["config"].pop("output")
    report["config"].pop("workers")
    (root / "report.json").write_text(dumps(report))
    report["results"] = results
    return report
