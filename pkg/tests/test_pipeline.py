import json

import numpy as np
import pytest

from mbmf.errors import ParameterError, ScaleOutOfRangeError
from mbmf.ingest import divisors_in_band
from mbmf.pipeline import (AnalysisConfig, analyze_events, build_report, dumps_report,
                           fluctuation_table_from_events, resolve_scales, to_jsonable, write_figures)
from mbmf.surrogates import poisson_surrogate


@pytest.fixture(scope="module")
def small_run():
    events = poisson_surrogate(1 / 15, seed=11, n_days=20)
    return events, analyze_events(events, AnalysisConfig(seed=2, bootstrap=20, q_min=-5, q_max=5))


def test_default_scales():
    scales = resolve_scales(AnalysisConfig())
    # a cubic detrend needs at least 5 windows
    assert scales == [s for s in divisors_in_band(28200, 4, 470) if s >= 5]
    assert 94 in scales and 24 in scales and 120 in scales


def test_explicit_scales_must_divide():
    assert resolve_scales(AnalysisConfig(scales=[24, 47])) == [24, 47, 94]
    with pytest.raises(ParameterError):
        resolve_scales(AnalysisConfig(scales=[7]))


@pytest.mark.parametrize("bad", [
    {"window_secs": 7}, {"fit_smin": 120, "fit_smax": 24}, {"q_step": 0}, {"bootstrap": -1},
    {"derivative": "spline"}, {"no_such_key": 1},
])
def test_config_validation(bad):
    with pytest.raises(ParameterError):
        AnalysisConfig.from_mapping(bad)


def test_config_digest_tracks_values():
    assert AnalysisConfig().digest() == AnalysisConfig().digest()
    assert AnalysisConfig(seed=1).digest() != AnalysisConfig().digest()


def test_report_structure(small_run):
    events, result = small_run
    rep = result.report()
    assert rep["schema_version"] == 1
    assert rep["provenance"]["seed"] == 2 and rep["provenance"]["rng"] == "PCG64"
    assert rep["input"]["n_days"] == 20 and rep["input"]["meta"]["kind"] == "poisson"
    assert len(rep["exponents"]["tau"]) == len(rep["exponents"]["q"]) == 101
    assert rep["diagnostics"]["contact"]["ok"]
    assert rep["autocorrelation"]["scale"] == 94
    assert {b["is_main"] for b in rep["branches"]} >= {True}
    json.loads(dumps_report(rep))


def test_report_nan_becomes_null():
    assert to_jsonable({"x": np.nan, "y": np.array([1.0, np.inf]), "z": np.int64(3)}) == \
        {"x": None, "y": [1.0, None], "z": 3}


def test_figures_written(small_run, tmp_path):
    _, result = small_run
    paths = write_figures(result, tmp_path)
    names = {p.name for p in paths}
    assert {"fig_fq.csv", "fig_hurst.csv", "fig_cq.csv", "fig_autocorr.csv"} <= names
    assert any(n.startswith("fig_spectrum_branch") for n in names)
    header = (tmp_path / "fig_hurst.csv").read_text().splitlines()[0]
    assert header.startswith("q,h,tau,D,alpha,f")


def test_sparse_scales_skipped_outside_fit_range():
    """Windows too short to hold an event drop the scale when it lies outside the fit range."""
    events = poisson_surrogate(1 / 20, seed=1, n_days=5)
    config = AnalysisConfig(s_max=470, bootstrap=0)
    table, notes, _ = fluctuation_table_from_events(events, config)
    skipped = {n["scale"] for n in notes}
    assert 470 in skipped and all(s > config.fit_smax for s in skipped)
    assert not skipped & set(table.scales.tolist())
    assert set(divisors_in_band(28200, 24, 120)) <= set(table.scales.tolist())


def test_sparse_scale_inside_fit_range_raises():
    events = poisson_surrogate(1 / 600, seed=1, n_days=5)
    with pytest.raises(ScaleOutOfRangeError):
        fluctuation_table_from_events(events, AnalysisConfig(bootstrap=0))


def test_calendar_mismatch():
    events = poisson_surrogate(1 / 15, seed=1, n_days=2)
    with pytest.raises(ParameterError):
        analyze_events(events, AnalysisConfig(session_secs=27000))


def test_threads_do_not_change_report():
    events = poisson_surrogate(1 / 15, seed=12, n_days=10)
    config = AnalysisConfig(seed=3, bootstrap=10, q_min=-3, q_max=3)
    one = dumps_report(build_report(analyze_events(events, config, threads=1)))
    many = dumps_report(build_report(analyze_events(events, config, threads=3)))
    assert one == many
