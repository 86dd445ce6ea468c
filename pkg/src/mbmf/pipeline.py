"""End-to-end analysis: events -> fluctuation table -> h(q) -> spectrum -> report."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FitError, MBMFError, ParameterError, ScaleOutOfRangeError
from .ingest import Calendar, EventSeries, activity_stats, divisors_in_band, mean_wait_grid
from .profile import FluctuationTable, ensemble_autocorrelation, fit_decay, fluctuation_row
from .scaling import (ScalingResult, escort_distribution, log_moments, make_q_grid, partition_function,
                      scaling_analysis)
from .spectrum import (ExponentSet, PhaseDiagram, BranchSet, asymptote_diagnostics, bounds_check,
                       classify_phases, contact_check, exponents, identity_residuals,
                       information_diagnostics, segment_branches, tau_curvature)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class AnalysisConfig:
    """Every tunable of an analysis run; echoed verbatim into the report."""

    session_secs: int = 28200
    day_start_offset_s: int = 32400
    skip_weekends: bool = True
    window_secs: int = 300
    scales: list | None = None
    s_min: int = 4
    s_max: int = 470
    fit_smin: int = 24
    fit_smax: int = 120
    q_min: float = -10.0
    q_max: float = 10.0
    q_step: float = 0.1
    poly_degree: int = 3
    bootstrap: int = 200
    seed: int = 0
    epsilon: float = 1e-6
    cap: float | None = None
    derivative: str = "central"
    anchor_contact: bool = True
    n_sigma: float = 3.0
    ac_max_lag: int = 40
    column: str | None = None

    @classmethod
    def from_mapping(cls, mapping: dict) -> "AnalysisConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(mapping) - names)
        if unknown:
            raise ParameterError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**mapping).validated()

    def validated(self) -> "AnalysisConfig":
        if self.session_secs <= 0 or self.window_secs <= 0:
            raise ParameterError("session and window durations must be positive")
        if self.session_secs % self.window_secs:
            raise ParameterError(f"window_secs={self.window_secs} does not divide "
                                 f"session_secs={self.session_secs}")
        if self.fit_smin >= self.fit_smax:
            raise ParameterError("need fit_smin < fit_smax")
        if self.q_step <= 0 or self.q_max <= self.q_min:
            raise ParameterError("need q_max > q_min and q_step > 0")
        if self.poly_degree < 0:
            raise ParameterError("poly_degree must be non-negative")
        if self.bootstrap < 0:
            raise ParameterError("bootstrap must be >= 0")
        if self.derivative not in ("central", "savgol"):
            raise ParameterError("derivative must be 'central' or 'savgol'")
        return self

    @property
    def calendar(self) -> Calendar:
        return Calendar(self.session_secs, self.day_start_offset_s, self.skip_weekends)

    @property
    def fit_range(self) -> tuple:
        return (self.fit_smin, self.fit_smax)

    @property
    def diagnostic_scale(self) -> int:
        return self.session_secs // self.window_secs

    def q_grid(self) -> np.ndarray:
        return make_q_grid(self.q_min, self.q_max, self.q_step)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def resolve_scales(config: AnalysisConfig) -> list[int]:
    """Candidate scales: explicit list, else divisors of T in ``[s_min, s_max]``.

    Scales too short for the detrending polynomial are left out; the
    diagnostic scale ``T / window_secs`` is always included.
    """
    T = config.session_secs
    if config.scales:
        scales = sorted({int(s) for s in config.scales})
        bad = [s for s in scales if s < 1 or T % s]
        if bad:
            raise ParameterError(f"scales {bad} do not divide the session length {T}")
    else:
        scales = divisors_in_band(T, config.s_min, config.s_max)
    scales = [s for s in scales if s >= config.poly_degree + 2]
    if config.diagnostic_scale not in scales and config.diagnostic_scale >= config.poly_degree + 2:
        scales = sorted(set(scales) | {config.diagnostic_scale})
    return scales


@dataclass
class ScaleRow:
    scale: int
    F2: np.ndarray | None
    lagged: np.ndarray | None
    abs_dev_mean: float
    n_above_delta: int
    mean_count: float
    error: Exception | None = None


def _scale_row(events: EventSeries, s: int, config: AnalysisConfig) -> ScaleRow:
    try:
        grid = mean_wait_grid(events, s, epsilon=config.epsilon, cap=config.cap)
    except ScaleOutOfRangeError as exc:
        return ScaleRow(s, None, None, math.nan, 0, math.nan, error=exc)
    F2, lagged, absdev = fluctuation_row(grid, config.poly_degree,
                                         lags=s == config.diagnostic_scale)
    stats = activity_stats(grid)
    return ScaleRow(s, F2, lagged, absdev, grid.n_above_delta, stats.grand_mean_count)


def fluctuation_table_from_events(events: EventSeries, config: AnalysisConfig, threads: int = 1):
    """Fluctuation table over all usable scales plus per-scale bookkeeping.

    Scales are processed in parallel and assembled in scale order, so the
    result does not depend on ``threads``.  A scale with empty windows is
    skipped (and noted) outside the fit range and is an error inside it.
    """
    scales = resolve_scales(config)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda s: _scale_row(events, s, config), scales))
    else:
        rows = [_scale_row(events, s, config) for s in scales]
    lo, hi = config.fit_range
    kept, notes = [], []
    for row in rows:
        if row.error is None:
            kept.append(row)
        elif lo <= row.scale <= hi:
            raise row.error
        else:
            notes.append({"scale": row.scale, "reason": str(row.error)})
    if not kept:
        raise ScaleOutOfRangeError("no usable scale")
    table = FluctuationTable(
        scales=np.array([r.scale for r in kept]), F2=np.vstack([r.F2 for r in kept]),
        lagged={r.scale: r.lagged for r in kept if r.lagged is not None},
        abs_dev_mean={r.scale: r.abs_dev_mean for r in kept})
    per_scale = [{"scale": r.scale, "n_above_delta": r.n_above_delta,
                  "mean_window_count": r.mean_count} for r in kept]
    return table, notes, per_scale


@dataclass
class AnalysisResult:
    config: AnalysisConfig
    table: FluctuationTable
    scaling: ScalingResult
    exponents: ExponentSet
    branches: BranchSet
    phases: PhaseDiagram
    diagnostics: dict
    autocorrelation: dict | None
    input_info: dict = field(default_factory=dict)
    skipped_scales: list = field(default_factory=list)
    per_scale: list = field(default_factory=list)

    def report(self) -> dict:
        return build_report(self)


def analyze_table(table: FluctuationTable, config: AnalysisConfig) -> tuple:
    """Scaling fit, exponents, branches and phases from a fluctuation table."""
    scaling = scaling_analysis(table, config.q_grid(), config.fit_range,
                               bootstrap=config.bootstrap, seed=config.seed)
    ex = exponents(scaling, derivative=config.derivative, anchor_contact=config.anchor_contact)
    branches = segment_branches(ex, n_sigma=config.n_sigma)
    phases = classify_phases(ex, branches)
    return scaling, ex, branches, phases


def _diagnostics(table, scaling, ex, config) -> dict:
    out = {"contact": dataclasses.asdict(contact_check(ex)) if config.anchor_contact else None,
           "identities": identity_residuals(ex),
           "asymptotes": asymptote_diagnostics(ex),
           "tau_curvature": tau_curvature(ex.q, ex.tau) if ex.q[0] <= -5 and ex.q[-1] >= 5 else None}
    violations = bounds_check(ex)
    counts: dict = {}
    for v in violations:
        counts[v.rule] = counts.get(v.rule, 0) + 1
    out["bounds"] = {"n_violations": len(violations), "by_rule": counts,
                     "first": [dataclasses.asdict(v) for v in violations[:20]]}
    s = config.diagnostic_scale
    if s in set(table.scales.tolist()):
        escort = escort_distribution(table, s)
        info = information_diagnostics(escort, scaling, table)
        out["information"] = dataclasses.asdict(info)
        out["escort"] = {"scale": s, "sum_p": float(np.sum(escort.p)),
                         "Z0": partition_function(escort, 0.0), "n_days": escort.n_days}
    # moment ordering F_q' >= F_q for q' > q at every scale
    lm = log_moments(table.F2, ex.q)
    worst = float(np.max(lm[:-1] - lm[1:])) if ex.q.size > 1 else 0.0
    out["moment_ordering_max_violation"] = max(worst, 0.0)
    return out


def _autocorrelation(table, config) -> dict | None:
    s = config.diagnostic_scale
    if s not in table.lagged:
        return None
    curve = ensemble_autocorrelation(table, s)
    n = min(config.ac_max_lag, s - 1)
    lags = curve.lags[1:n + 1]
    vals = curve.values[1:n + 1]
    fits = {}
    for model in ("exponential", "power"):
        try:
            fit = fit_decay(vals, model=model, lags=lags)
            fits[model] = {"params": fit.params, "errors": fit.errors,
                           "chi2_per_dof": fit.chi2_per_dof}
        except FitError as exc:
            fits[model] = {"error": str(exc)}
    return {"scale": s, "lags": curve.lags, "values": curve.values,
            "mean_sq_dev": curve.mean_sq_dev, "sq_mean_abs_dev": curve.sq_mean_abs_dev,
            "fit_lags": [int(lags[0]), int(lags[-1])] if lags.size else None, "fits": fits}


def analyze_events(events: EventSeries, config: AnalysisConfig | None = None,
                   threads: int = 1) -> AnalysisResult:
    """Run the full analysis on an event series."""
    config = (config or AnalysisConfig()).validated()
    if events.calendar.session_duration_s != config.session_secs:
        raise ParameterError("event calendar and configuration disagree on the session length")
    table, notes, per_scale = fluctuation_table_from_events(events, config, threads)
    scaling, ex, branches, phases = analyze_table(table, config)
    result = AnalysisResult(config=config, table=table, scaling=scaling, exponents=ex,
                            branches=branches, phases=phases,
                            diagnostics=_diagnostics(table, scaling, ex, config),
                            autocorrelation=_autocorrelation(table, config),
                            skipped_scales=notes, per_scale=per_scale)
    result.input_info = {"n_events": events.n_events, "n_days": events.n_days,
                         "n_dropped": events.n_dropped, **({"meta": events.meta} if events.meta else {})}
    return result


# ----------------------------------------------------------------------------
# serialization


def to_jsonable(obj):
    """Plain JSON types; NaN and infinities become ``null``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if dataclasses.is_dataclass(obj):
        return to_jsonable(dataclasses.asdict(obj))
    return obj


def _branch_record(k, b):
    return {"index": k, "q_interval": list(b.q_interval), "stability": b.stability,
            "is_main": b.is_main, "d2f_continuous": b.d2f_continuous,
            "alpha_range": list(b.alpha_range), "n_points": int(b.alpha.size)}


def build_report(result: AnalysisResult) -> dict:
    ex, sc, ph = result.exponents, result.scaling, result.phases
    config = result.config
    report = {
        "schema_version": SCHEMA_VERSION,
        "provenance": {"package": "mbmf", "version": __version__, "config_sha256": config.digest(),
                       "seed": config.seed, "rng": "PCG64"},
        "config": config.as_dict(),
        "input": result.input_info,
        "scales": {"used": result.table.scales, "skipped": result.skipped_scales,
                   "fit_range": list(sc.fit_range), "fit_scales": sc.scales_used,
                   "per_scale": result.per_scale},
        "scaling": {"q": sc.q, "h": sc.h, "h_err": sc.h_err, "h_boot_err": sc.h_boot_err,
                    "B": sc.B, "B_err": sc.B_err, "chi2_per_dof": sc.chi2_per_dof,
                    "spread": sc.spread, "A_rel": sc.A_rel},
        "exponents": {
            "error_mode": ex.error_mode, "derivative": ex.derivative, "anchored": ex.anchored,
            **{k: getattr(ex, k) for k in ("q", "h", "tau", "D", "alpha", "f", "c", "h_rel",
                                           "tau_rel", "D_rel", "alpha_from_tau")},
            "errors": {k: v for k, v in sorted(ex.errors.items())},
        },
        "branches": [_branch_record(k, b) for k, b in enumerate(result.branches)],
        "branch_joins": {"mismatch": result.branches.join_mismatch, "smooth": result.branches.smooth},
        "phases": {
            "turning_points": ph.turning_points,
            "first_order_crossings": ph.first_order_crossings,
            "stability_map": ph.stability_map,
            "metastable_segments": ph.metastable_segments,
        },
        "diagnostics": result.diagnostics,
        "autocorrelation": result.autocorrelation,
    }
    return to_jsonable(report)


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps_report(report))


def _write_csv(path, header, columns):
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join("" if not math.isfinite(v) else f"{v:.17g}" for v in row) + "\n")


def write_figures(result: AnalysisResult, outdir) -> list[Path]:
    """Plot-ready CSV tables; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ex, sc, table = result.exponents, result.scaling, result.table
    written = []
    logF = log_moments(table.F2, sc.q)
    # long format: one row per (q, s)
    qq = np.repeat(sc.q, table.scales.size)
    ss = np.tile(table.scales, sc.q.size)
    p = outdir / "fig_fq.csv"
    _write_csv(p, ["q", "s", "F_q"], [qq, ss, np.exp(logF).ravel()])
    written.append(p)
    p = outdir / "fig_hurst.csv"
    names = ["h", "tau", "D", "alpha", "f", "h_rel", "tau_rel", "D_rel"]
    _write_csv(p, ["q"] + names + [f"{n}_err" for n in names],
               [ex.q] + [getattr(ex, n) for n in names] + [ex.errors[n] for n in names])
    written.append(p)
    for k, b in enumerate(result.branches):
        p = outdir / f"fig_spectrum_branch{k}.csv"
        _write_csv(p, ["alpha", "f", "q"], [b.alpha, b.f, b.q])
        written.append(p)
    p = outdir / "fig_cq.csv"
    _write_csv(p, ["q", "c", "c_err"], [ex.q, ex.c, ex.errors["c"]])
    written.append(p)
    if result.autocorrelation is not None:
        ac = result.autocorrelation
        p = outdir / "fig_autocorr.csv"
        _write_csv(p, ["j", "F2_j"], [ac["lags"], ac["values"]])
        written.append(p)
    return written


__all__ = ["AnalysisConfig", "AnalysisResult", "MBMFError", "SCHEMA_VERSION", "analyze_events",
           "analyze_table", "build_report", "dumps_report", "fluctuation_table_from_events",
           "resolve_scales", "to_jsonable", "write_figures", "write_report"]
