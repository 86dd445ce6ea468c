import json
import subprocess
import sys

import pytest

from mbmf.cli import main
from mbmf.ingest import write_events
from mbmf.surrogates import poisson_surrogate
from mbmf.synthetic import lrc_event_series

FAST = ["--bootstrap", "10", "--q-min", "-3", "--q-max", "3"]


@pytest.fixture(scope="module")
def event_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "events.csv"
    write_events(poisson_surrogate(1 / 15, seed=4, n_days=12), path)
    return path


def test_oracle_point(capsys):
    assert main(["oracle", "--q", "1"]) == 0
    out = capsys.readouterr().out.split()
    assert out == ["h=3", "τ=0", "D=1", "α=1", "f=1", "c=6", "h_rel=0", "τ_rel=0", "D_rel=-2"]


def test_oracle_selftest(capsys):
    assert main(["oracle", "--selftest"]) == 0
    assert "selftest ok" in capsys.readouterr().out


def test_oracle_table(tmp_path):
    out = tmp_path / "oracle.csv"
    assert main(["oracle", "--q-min", "-2", "--q-max", "2", "--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("q,h,tau")
    assert len(lines) == 42


def test_analyze_writes_report(event_file, tmp_path, capsys):
    code = main(["analyze", "--input", str(event_file), "--output-dir", str(tmp_path),
                 "--emit-figures", "--threads", "2", *FAST])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["input"]["path"] == "events.csv"
    assert rep["config"]["bootstrap"] == 10
    assert (tmp_path / "fig_hurst.csv").exists()
    assert "days=12" in capsys.readouterr().out


def test_config_file_precedence(event_file, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("[analysis]\nbootstrap = 5\nseed = 9\nq_min = -3.0\nq_max = 3.0\n")
    assert main(["analyze", "--input", str(event_file), "--output-dir", str(tmp_path),
                 "--config", str(cfg), "--seed", "4", "--threads", "1"]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["config"]["bootstrap"] == 5
    assert rep["config"]["seed"] == 4


def test_report_identical_across_threads(event_file, tmp_path):
    blobs = []
    for t in ("1", "4", "8"):
        out = tmp_path / t
        assert main(["analyze", "--input", str(event_file), "--output-dir", str(out),
                     "--threads", t, *FAST]) == 0
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_threads_from_environment(event_file, tmp_path, monkeypatch):
    monkeypatch.setenv("MBMF_THREADS", "0")
    assert main(["analyze", "--input", str(event_file), "--output-dir", str(tmp_path), *FAST]) == 2


def test_missing_input_exit_code(tmp_path, capsys):
    assert main(["analyze", "--input", str(tmp_path / "none.csv")]) == 2
    assert "InputError" in capsys.readouterr().err


def test_malformed_input_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t\n345600\nxyz\n")
    assert main(["analyze", "--input", str(bad)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_bad_parameter_exit_code(event_file, capsys):
    assert main(["analyze", "--input", str(event_file), "--window-secs", "7"]) == 2


def test_surrogate_poisson_rate(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["surrogate", "poisson", "--rate", "0.0667", "--n-days", "3", "--seed", "1",
                 "--output", str(out)]) == 0
    meta = json.loads((tmp_path / "p.csv.meta.json").read_text())
    assert meta["seed"] == 1 and meta["rng"] == "PCG64"
    first = out.read_bytes()
    assert main(["surrogate", "poisson", "--rate", "0.0667", "--n-days", "3", "--seed", "1",
                 "--output", str(out)]) == 0
    assert out.read_bytes() == first


def test_surrogate_shuffle_compare(tmp_path):
    src = tmp_path / "lrc.csv"
    write_events(lrc_event_series(10, 0.8, seed=0, mean=2.0, max_wait=200), src)
    assert main(["surrogate", "shuffle", "--input", str(src), "--seed", "3", "--output",
                 str(tmp_path / "s.csv"), "--compare", "--output-dir", str(tmp_path),
                 "--s-max", "120", "--bootstrap", "0", "--q-min", "-5", "--q-max", "5"]) == 0
    summary = json.loads((tmp_path / "compare.json").read_text())
    assert set(summary) == {"empirical", "shuffled", "poisson"}
    assert (tmp_path / "fig_tau_overlay.csv").exists()


def test_shuffle_needs_input(capsys):
    assert main(["surrogate", "shuffle", "--seed", "1"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mbmf", "oracle", "--q", "0"],
                         capture_output=True, text=True, check=True)
    assert "c=0" in res.stdout
