import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from needsbased import io
from needsbased.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
BASE_WEEK = str(CONFIGS / "base_week.toml")


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert run("synth", "--n", 20, "--zones", 3, "--seed", 5, "--out-dir", out) == 0
    return out


def test_solve_full(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert run("solve", BASE_WEEK, "--out", out) == 0
    doc = json.loads(out.read_text())
    io.validate(doc, "solve_result")
    assert doc["mode"] == "full"
    assert doc["result"]["objective"] == pytest.approx(39.73296317924665, rel=1e-12)
    assert "objective" in capsys.readouterr().out


def test_solve_multiweek_one_week(tmp_path):
    out = tmp_path / "m.json"
    assert run("solve", BASE_WEEK, "--multiweek", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["mode"] == "multiweek" and doc["result"]["horizon_weeks"] == 1


def test_solve_conditioned_weekend(tmp_path):
    out = tmp_path / "c.json"
    assert run("solve", BASE_WEEK, "--conditioned", CONFIGS / "weekend_only.json", "--out", out) == 0
    res = json.loads(out.read_text())["result"]
    assert all(x == 0 for x in res["duration"][:5])
    assert res["duration"][6] == pytest.approx(2.3456419248424476, rel=1e-12)
    assert res["objective"] == pytest.approx(34.01867746496094, rel=1e-12)


def test_solve_cobb_douglas_with_zone_file(tmp_path):
    out = tmp_path / "cd.json"
    assert run("solve", CONFIGS / "base_week_cobbdouglas.toml", "--out", out) == 0
    io.validate(json.loads(out.read_text()), "solve_result")


def test_exit_codes(tmp_path):
    assert run("solve", tmp_path / "missing.toml") == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[model]\ngamma = -1\n")
    assert run("solve", bad) == 2
    with pytest.raises(SystemExit) as e:
        main(["solve"])
    assert e.value.code == 2
    zero = tmp_path / "zero.json"
    zero.write_text(json.dumps({"delta": [0] * 7}))
    assert run("solve", BASE_WEEK, "--conditioned", zero, "--out", tmp_path / "z.json") == 3
    assert run("solve", BASE_WEEK, "--threads", 0) == 2


def test_synth_outputs(synth_dir):
    for name in ("observations.csv", "scenario.json", "summary.json", "population.json",
                 "participation_by_day.csv", "duration_hist.csv", "tt_hist.csv"):
        assert (synth_dir / name).exists(), name
    summ = json.loads((synth_dir / "summary.json").read_text())
    io.validate(summ, "synth_summary")
    obs = io.read_observations(synth_dir / "observations.csv")
    assert len(obs) + len(summ["excluded"]) == 20


def test_loglik_point(tmp_path, synth_dir):
    out = tmp_path / "ll"
    assert run("loglik", "--data", synth_dir / "observations.csv", "--scenario", synth_dir / "scenario.json",
               "--draws", 5, "--out-dir", out) == 0
    doc = json.loads((out / "loglik.json").read_text())
    assert doc["loglik"] < 0 and doc["n_persons"] > 0


def test_loglik_surface_shape(tmp_path, synth_dir):
    out = tmp_path / "surf"
    assert run("loglik", "--data", synth_dir / "observations.csv", "--scenario", synth_dir / "scenario.json",
               "--draws", 3, "--surface", "p1=0.6:1.0:7", "q2=0.3:0.7:9", "--out-dir", out) == 0
    rows = list(csv.reader((out / "surface.csv").read_text().splitlines()))
    assert rows[0][0] == "p1\\q2" and len(rows[0]) == 10
    assert len(rows) == 8
    assert np.allclose([float(r[0]) for r in rows[1:]], np.linspace(0.6, 1.0, 7))


def test_estimate_budget(tmp_path, synth_dir):
    out = tmp_path / "est"
    assert run("estimate", "--data", synth_dir / "observations.csv", "--scenario", synth_dir / "scenario.json",
               "--draws", 3, "--free", "p1,q2", "--budget", 4, "--init", "p1=0.7,q2=0.45", "--out-dir", out) == 0
    trace = list(csv.reader((out / "trace.csv").read_text().splitlines()))
    assert trace[0] == ["iteration", "p1", "q2", "loglik"]
    assert 1 <= len(trace) - 1 <= 4
    doc = json.loads((out / "estimate.json").read_text())
    assert doc["iterations"] == len(trace) - 1
    assert run("estimate", "--data", synth_dir / "observations.csv", "--scenario", synth_dir / "scenario.json",
               "--free", "nope", "--out-dir", out) == 2


def test_verify_solver_suite(tmp_path):
    out = tmp_path / "v.json"
    assert run("verify", "--suite", "solver", "--out", out) == 0
    assert json.loads(out.read_text())["passed"] is True


def _tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(Path(d).rglob("*")) if p.is_file()}


def test_outputs_identical_across_thread_counts(tmp_path):
    outs = []
    for th in (1, 8):
        root = tmp_path / f"t{th}"
        root.mkdir()
        s = root / "synth"
        assert run("synth", "--n", 15, "--zones", 3, "--seed", 2, "--threads", th, "--out-dir", s) == 0
        common = ["--data", s / "observations.csv", "--scenario", s / "scenario.json", "--draws", 3,
                  "--threads", th]
        assert run("loglik", *common, "--out-dir", root / "ll") == 0
        assert run("loglik", *common, "--surface", "p1=0.7:0.9:2", "q2=0.4:0.5:2", "--out-dir", root / "surf") == 0
        assert run("estimate", *common, "--budget", 2, "--out-dir", root / "est") == 0
        assert run("solve", BASE_WEEK, "--threads", th, "--out", root / "solve.json") == 0
        outs.append(_tree(root))
    assert outs[0].keys() == outs[1].keys()
    for k in outs[0]:
        assert outs[0][k] == outs[1][k], k


def test_plot_flag(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "p.json"
    assert run("solve", BASE_WEEK, "--plot", "--out", out) == 0
    assert out.with_suffix(".png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "needsbased.cli", "solve", BASE_WEEK, "--out", str(tmp_path / "x.json")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
