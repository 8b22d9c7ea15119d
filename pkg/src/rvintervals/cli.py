"""Command-line interface.

Each stage has its own subcommand reading a tick CSV or a volatility CSV and
writing CSV or JSON to ``--out`` (stdout by default).  ``run-all`` runs the
whole chain and writes a report bundle to a directory.
"""

from __future__ import annotations

import argparse
import io
import sys

from . import __version__
from .config import OUTPUT_ENV, RunConfig, build_config
from .dfa import dfa_report
from .errors import AnalysisError
from .intervals import extract_intervals, write_intervals
from .ksframework import bootstrap_gof, scaling_test
from .memorydiag import conditional_pdfs, write_conditional
from .pipeline import dumps, load_volatility, run_analysis
from .stretchedexp import fit_sample
from .synthgen import TickPathSpec, gen_longmemory_volatility, gen_tick_path
from .volatility import Stage, parse_sessions, parse_ticks, prepare, write_ticks, write_volatility

_DEFAULTS = RunConfig()


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--volatility", choices=["R1", "R2"], help=f"volatility measure (default {_DEFAULTS.volatility})")
    g.add_argument("--q", help="comma-separated thresholds (default 2,3,4,5)")
    g.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    g.add_argument("--bins-per-decade", type=int, help="log bins per decade (default 20)")
    g.add_argument("--replicas", type=int, help="bootstrap replicas (default 1000)")
    g.add_argument("--seed", type=int, help="base random seed (default 0)")
    g.add_argument("--sessions", help=f"trading sessions (default {_DEFAULTS.sessions})")
    g.add_argument("--scaling-pair", help="two thresholds for the scaling test (default 2,5)")
    g.add_argument("--gof-q", help="thresholds for the bootstrap fit test (default 2,5)")
    g.add_argument("--cross-stock-q", type=float, help="threshold of the cross-instrument table (default 2)")
    g.add_argument("--keep-out-of-session", action="store_true", help="reject ticks outside sessions instead of dropping them")
    g.add_argument("--shuffled-control", action="store_true", default=None, help="also analyze a shuffled copy of each input")
    g.add_argument("--workers", type=int, help="processes for the bootstrap (default 1)")
    return p


def _config(args, **extra) -> RunConfig:
    overrides = {
        k: getattr(args, k, None)
        for k in (
            "volatility", "q", "alpha", "bins_per_decade", "replicas", "seed", "sessions",
            "scaling_pair", "gof_q", "cross_stock_q", "shuffled_control", "workers",
        )
    }
    if getattr(args, "keep_out_of_session", False):
        overrides["drop_out_of_session"] = False
    overrides.update(extra)
    return build_config(getattr(args, "config", None), **overrides)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _normalized(args, cfg: RunConfig):
    vol = load_volatility(args.input, cfg)
    return vol if vol.stage is Stage.NORMALIZED else prepare(vol)


def cmd_ingest(args) -> int:
    cfg = _config(args)
    ticks = parse_ticks(args.input, parse_sessions(cfg.sessions), cfg.drop_out_of_session)
    buf = io.StringIO()
    write_ticks(ticks, buf)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_volatility(args) -> int:
    cfg = _config(args)
    vol = load_volatility(args.input, cfg)
    if not args.raw:
        vol = prepare(vol)
    buf = io.StringIO()
    write_volatility(vol, buf)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_intervals(args) -> int:
    cfg = _config(args)
    vol = _normalized(args, cfg)
    buf = io.StringIO()
    write_intervals([extract_intervals(vol, q) for q in cfg.q], buf)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_scaling_test(args) -> int:
    cfg = _config(args)
    vol = _normalized(args, cfg)
    qa, qb = cfg.scaling_pair
    rep = scaling_test(extract_intervals(vol, qa), extract_intervals(vol, qb), cfg.alpha)
    _emit(dumps(rep.as_dict()), args.out)
    return 0


def cmd_fit_se(args) -> int:
    cfg = _config(args)
    vol = _normalized(args, cfg)
    fits = [fit_sample(extract_intervals(vol, q), cfg.bins_per_decade).as_dict() for q in cfg.q]
    _emit(dumps(fits), args.out)
    return 0


def cmd_gof(args) -> int:
    cfg = _config(args)
    vol = _normalized(args, cfg)
    rows = []
    for q in cfg.gof_q:
        reps = bootstrap_gof(
            extract_intervals(vol, q),
            cfg.replicas,
            rng_seed=cfg.seed + int(round(1000 * q)),
            bins_per_decade=cfg.bins_per_decade,
            workers=cfg.workers,
        )
        rows.extend({"q": q, **r.as_dict()} for r in reps.values())
    _emit(dumps(rows), args.out)
    return 0


def cmd_conditional(args) -> int:
    cfg = _config(args)
    vol = _normalized(args, cfg)
    sets = []
    for q in cfg.q:
        s = extract_intervals(vol, q)
        sets.append(conditional_pdfs(s, cfg.bins_per_decade, discrete=s.discrete))
    buf = io.StringIO()
    write_conditional(sets, buf)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_dfa(args) -> int:
    cfg = _config(args)
    vol = _normalized(args, cfg)
    out = {"volatility": dfa_report(vol.values).as_dict()}
    if args.intervals:
        out["intervals"] = {repr(q): dfa_report(extract_intervals(vol, q).intervals).as_dict() for q in cfg.q}
    _emit(dumps(out), args.out)
    return 0


def cmd_synth(args) -> int:
    buf = io.StringIO()
    if args.kind == "ticks":
        write_ticks(gen_tick_path(TickPathSpec(days=args.days, seed=args.seed)), buf)
    else:
        write_volatility(gen_longmemory_volatility(args.hurst, args.n, args.seed, sigma0=args.sigma0), buf)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_run_all(args) -> int:
    cfg = _config(args, inputs=args.inputs or None, output=args.output)
    report = run_analysis(cfg)
    for name, inst in report["instruments"].items():
        status = "ok" if inst["ok"] else "; ".join(inst["errors"])
        print(f"{name}: {status}", file=sys.stderr)
    print(f"report written to {cfg.output}", file=sys.stderr)
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rvintervals", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    cfg = _config_parent()

    def single(name, func, help_text, inp="tick CSV or volatility CSV"):
        p = sub.add_parser(name, parents=[cfg], help=help_text)
        p.add_argument("input", help=inp)
        p.add_argument("-o", "--out", help="output file (default stdout)")
        p.set_defaults(func=func)
        return p

    single("ingest", cmd_ingest, "validate a tick CSV and write it back cleaned", inp="tick CSV")
    p = single("volatility", cmd_volatility, "per-minute volatility series")
    p.add_argument("--raw", action="store_true", help="skip deseasonalizing and normalizing")
    single("intervals", cmd_intervals, "return intervals above each threshold")
    single("scaling-test", cmd_scaling_test, "two-sample KS test of scaled intervals")
    single("fit-se", cmd_fit_se, "stretched-exponential fit per threshold")
    single("gof", cmd_gof, "parametric bootstrap goodness of fit")
    single("conditional", cmd_conditional, "interval PDFs conditioned on the preceding quartile")
    p = single("dfa", cmd_dfa, "DFA exponent and crossover")
    p.add_argument("--intervals", action="store_true", help="also analyze the interval sequences")

    p = sub.add_parser("synth", help="write a synthetic tick path or long-memory volatility series")
    p.add_argument("kind", choices=["ticks", "volatility"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=int, default=10, help="trading days of ticks")
    p.add_argument("--hurst", type=float, default=0.85)
    p.add_argument("--n", type=int, default=2**17, help="volatility length (power of 2)")
    p.add_argument("--sigma0", type=float, default=1.0, help="log-volatility scale")
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run-all", parents=[cfg], help="full analysis with a report bundle")
    p.add_argument("inputs", nargs="*", help="tick or volatility CSVs, one per instrument")
    p.add_argument("--output", help=f"report directory (env {OUTPUT_ENV} takes precedence)")
    p.set_defaults(func=cmd_run_all)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AnalysisError, OSError) as exc:
        print(f"rvintervals: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
