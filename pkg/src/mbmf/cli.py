"""Command-line front end: ``mbmf analyze``, ``mbmf surrogate`` and ``mbmf oracle``.

Exit codes: 0 success, 1 analysis error, 2 usage, input or parameter error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InputError, MBMFError, ParameterError
from .ingest import load_events, write_events
from .oracle import CubicModel, cubic_eval, oracle_table
from .pipeline import (AnalysisConfig, analyze_events, dumps_report, to_jsonable, write_figures,
                       _write_csv)
from .scaling import make_q_grid
from .spectrum import exponents, tau_curvature
from .surrogates import poisson_surrogate, shuffle_events

log = logging.getLogger("mbmf")

# CLI flag -> AnalysisConfig field
ANALYSIS_FLAGS = {
    "session_secs": ("--session-secs", int, "session length T in seconds"),
    "day_start_offset_s": ("--day-offset-secs", int, "session start, seconds after midnight UTC"),
    "window_secs": ("--window-secs", int, "window width used for the per-window diagnostics"),
    "q_min": ("--q-min", float, None),
    "q_max": ("--q-max", float, None),
    "q_step": ("--q-step", float, None),
    "fit_smin": ("--fit-smin", int, "smallest scale of the scaling fit"),
    "fit_smax": ("--fit-smax", int, "largest scale of the scaling fit"),
    "s_min": ("--s-min", int, "smallest candidate scale"),
    "s_max": ("--s-max", int, "largest candidate scale"),
    "poly_degree": ("--poly-degree", int, "detrending polynomial degree"),
    "bootstrap": ("--bootstrap", int, "day-resampling bootstrap draws (0 disables)"),
    "seed": ("--seed", int, "seed for every random draw"),
    "epsilon": ("--epsilon", float, "replacement for zero waits"),
    "cap": ("--cap", float, "clip window mean waits at this value"),
    "derivative": ("--derivative", str, "central | savgol"),
    "n_sigma": ("--n-sigma", float, "significance of turning points in error-band units"),
    "ac_max_lag": ("--ac-max-lag", int, "largest lag of the decay fits"),
    "column": ("--column", str, "timestamp column of CSV input"),
}


def _int_list(text):
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_analysis_flags(p, skip=()):
    g = p.add_argument_group("analysis")
    for name, (flag, typ, help_) in ANALYSIS_FLAGS.items():
        if name in skip:
            continue
        g.add_argument(flag, dest=name, type=typ, default=None, help=help_)
    g.add_argument("--scales", dest="scales", type=_int_list, default=None,
                   help="explicit comma-separated scale list")
    g.add_argument("--no-skip-weekends", dest="skip_weekends", action="store_false", default=None)
    g.add_argument("--no-anchor", dest="anchor_contact", action="store_false", default=None,
                   help="drop the contact shift tau = q h - h(1)")
    g.add_argument("--config", type=Path, default=None, help="TOML or JSON configuration file")
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $MBMF_THREADS, else all cores)")


def load_config_file(path: Path) -> dict:
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from None
    else:
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"{path}: invalid TOML ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: configuration must be a table")
    return data.get("analysis", data)


def resolve_config(args) -> AnalysisConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    merged = {}
    if getattr(args, "config", None) is not None:
        merged.update(load_config_file(args.config))
    for name in list(ANALYSIS_FLAGS) + ["scales", "skip_weekends", "anchor_contact"]:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return AnalysisConfig.from_mapping(merged)


def resolve_threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        n = args.threads
    elif os.environ.get("MBMF_THREADS"):
        try:
            n = int(os.environ["MBMF_THREADS"])
        except ValueError:
            raise ParameterError("MBMF_THREADS must be an integer") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ParameterError("thread count must be >= 1")
    return n


def _load(path, config: AnalysisConfig):
    return load_events(path, config.calendar, column=config.column)


def cmd_analyze(args) -> int:
    config = resolve_config(args)
    threads = resolve_threads(args)
    events = _load(args.input, config)
    result = analyze_events(events, config, threads=threads)
    report = result.report()
    report["input"]["path"] = Path(args.input).name
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(dumps_report(report))
    written = [outdir / "report.json"]
    if args.emit_figures:
        written += write_figures(result, outdir)
    ex = result.exponents
    i1 = ex.index_q1
    print(f"days={events.n_days} events={events.n_events} scales={len(result.table.scales)} "
          f"h(1)={ex.h[i1]:.6g} branches={len(result.branches)} "
          f"turning_points={len(result.phases.turning_points)} "
          f"crossings={len(result.phases.first_order_crossings)}")
    for p in written:
        print(f"wrote {p}")
    return 0


def _overlay(results: dict, outdir: Path) -> list[Path]:
    names = list(results)
    q = results[names[0]].exponents.q
    cols, header = [q], ["q"]
    for name in names:
        ex = results[name].exponents
        cols += [ex.tau, ex.errors["tau"]]
        header += [f"tau_{name}", f"tau_{name}_err"]
    path = outdir / "fig_tau_overlay.csv"
    _write_csv(path, header, cols)
    summary = {}
    for name, r in results.items():
        ex = r.exponents
        curv = tau_curvature(ex.q, ex.tau) if ex.q[0] <= -5 and ex.q[-1] >= 5 else None
        summary[name] = {"tau_curvature": curv, "h_spread_max": float(np.nanmax(np.abs(r.scaling.spread))),
                         "provenance": r.input_info.get("meta")}
    comp = outdir / "compare.json"
    comp.write_text(json.dumps(to_jsonable(summary), sort_keys=True, indent=2) + "\n")
    return [path, comp]


def cmd_surrogate(args) -> int:
    config = resolve_config(args)
    threads = resolve_threads(args)
    empirical = None
    if args.mode == "shuffle":
        if args.input is None:
            raise UsageError("surrogate shuffle needs --input")
        empirical = _load(args.input, config)
        surrogate = shuffle_events(empirical, seed=args.seed, passes=args.passes)
    else:
        source = args.rate_from or args.input
        if args.rate is not None:
            surrogate = poisson_surrogate(args.rate, seed=args.seed, n_days=args.n_days,
                                          calendar=config.calendar)
        elif source is not None:
            empirical = _load(source, config)
            surrogate = poisson_surrogate(empirical, seed=args.seed, calendar=config.calendar,
                                          per_day=not args.global_rate)
        else:
            raise UsageError("surrogate poisson needs --rate or --rate-from")
    out = Path(args.output or f"surrogate_{args.mode}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_events(surrogate, out, meta=surrogate.meta)
    print(f"wrote {out} ({surrogate.n_events} events, {surrogate.n_days} days)")
    if args.compare:
        outdir = Path(args.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        results = {}
        if empirical is not None:
            results["empirical"] = analyze_events(empirical, config, threads)
        if args.mode == "shuffle":
            results["shuffled"] = analyze_events(surrogate, config, threads)
            poisson = poisson_surrogate(empirical, seed=args.seed, calendar=config.calendar)
            results["poisson"] = analyze_events(poisson, config, threads)
        else:
            results["poisson"] = analyze_events(surrogate, config, threads)
        for p in _overlay(results, outdir):
            print(f"wrote {p}")
    return 0


def cmd_oracle(args) -> int:
    model = CubicModel(a=args.a, c=args.c)
    shifted = not args.unshifted
    if args.q is not None:
        pt = cubic_eval(model, args.q, shifted=shifted)
        print(" ".join(f"{k}={v + 0.0:.10g}" for k, v in (
            ("h", pt.h), ("τ", pt.tau), ("D", pt.D), ("α", pt.alpha), ("f", pt.f),
            ("c", pt.c_heat), ("h_rel", pt.h_rel), ("τ_rel", pt.tau_rel), ("D_rel", pt.D_rel))))
        return 0
    step = args.q_step if args.q_step is not None else (0.01 if args.selftest else 0.1)
    q = make_q_grid(args.q_min, args.q_max, step)
    if args.selftest:
        return _oracle_selftest(model, q)
    table = oracle_table(model, q) if shifted else cubic_eval(model, q, shifted=False).as_dict()
    names = ["q", "h", "tau", "D", "alpha", "f", "c_heat", "h_rel", "tau_rel", "D_rel"]
    if args.output:
        _write_csv(args.output, names, [table[n] for n in names])
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(",".join(names) + "\n")
        for row in zip(*(np.asarray(table[n]) for n in names)):
            sys.stdout.write(",".join(f"{float(v):.17g}" for v in row) + "\n")
    return 0


def _oracle_selftest(model: CubicModel, q, tol: float = 1e-3) -> int:
    ex = exponents(q=q, h=model.h(q))
    ref = cubic_eval(model, q)
    worst = 0.0
    pairs = [("tau", "tau"), ("D", "D"), ("alpha", "alpha"), ("f", "f"), ("c", "c_heat"),
             ("h_rel", "h_rel"), ("tau_rel", "tau_rel"), ("D_rel", "D_rel")]
    for mine, theirs in pairs:
        x, r = getattr(ex, mine), getattr(ref, theirs)
        dev = float(np.max(np.abs(x - r) / np.maximum(1.0, np.abs(r))))
        worst = max(worst, dev)
        print(f"{mine:8s} max deviation {dev:.3e}")
    status = "ok" if worst <= tol else "FAILED"
    print(f"selftest {status}: worst {worst:.3e} (tolerance {tol:g}, q step {q[1] - q[0]:g})")
    return 0 if worst <= tol else 1


class UsageError(MBMFError):
    exit_code = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbmf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mbmf {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full analysis of an event file")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output-dir", default=".", type=Path)
    p.add_argument("--emit-figures", action="store_true", help="also write plot-ready CSV tables")
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("surrogate", help="Poisson or shuffled reference series")
    p.add_argument("mode", choices=["poisson", "shuffle"])
    p.add_argument("--input", type=Path, default=None, help="empirical event file")
    p.add_argument("--rate-from", type=Path, default=None, help="take per-day rates from this file")
    p.add_argument("--rate", type=float, default=None, help="constant rate in events per second")
    p.add_argument("--n-days", type=int, default=100, help="sessions for a constant-rate surrogate")
    p.add_argument("--global-rate", action="store_true", help="one rate for all days")
    p.add_argument("--seed", type=int, required=True, help="seed of the surrogate and the analysis")
    p.add_argument("--passes", type=int, default=10, help="shuffle passes")
    p.add_argument("--output", type=Path, default=None)
    p.add_argument("--compare", action="store_true", help="analyze and overlay tau(q)")
    p.add_argument("--output-dir", default=".", type=Path)
    _add_analysis_flags(p, skip=("seed",))
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("oracle", help="closed-form cubic model tables and self-test")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--c", type=float, default=4.0)
    p.add_argument("--q", type=float, default=None, help="print every quantity at one q")
    p.add_argument("--q-min", type=float, default=-10.0)
    p.add_argument("--q-max", type=float, default=10.0)
    p.add_argument("--q-step", type=float, default=None)
    p.add_argument("--unshifted", action="store_true")
    p.add_argument("--output", type=Path, default=None)
    p.add_argument("--selftest", action="store_true")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except MBMFError as exc:
        origin = exc.__traceback__
        while origin.tb_next is not None:
            origin = origin.tb_next
        where = Path(origin.tb_frame.f_code.co_filename).stem
        print(f"mbmf {args.command}: {type(exc).__name__} in {where}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"mbmf {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
