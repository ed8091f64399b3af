import csv
import subprocess
import sys

import pytest

from sctsn import cli


def run_cli(*args):
    return cli.main([str(a) for a in args])


MINI = """version: 1
topology: line.topo
seed: 2
duration: 2.0
stats_period: 0.5
tt: {count: 2}
be: {count: 1, mean_interarrival: 0.05}
"""

LINE = """[switches]
a b c
[links]
a b
b c
[hosts]
h1 a
h2 c
h3 a
h4 c
"""


@pytest.fixture
def scenario(tmp_path):
    (tmp_path / "line.topo").write_text(LINE)
    (tmp_path / "mini.yaml").write_text(MINI)
    return tmp_path / "mini.yaml"


def test_run_writes_reports(scenario, tmp_path, capsys):
    out = tmp_path / "out"
    assert run_cli("run", scenario, "--out", out) == 0
    text = capsys.readouterr().out
    assert "class  frames" in text and "TT " in text and "BE " in text
    for name in ("metrics.csv", "latency.csv", "utilization.csv", "streams.csv", "weights.csv",
                 "summary.txt"):
        assert (out / name).is_file()
    rows = list(csv.reader((out / "metrics.csv").open()))
    assert rows[0] == ["metric", "value"]


def test_both_modes_give_comparable_csvs(scenario, tmp_path):
    for mode in ("sctsn", "srp"):
        assert run_cli("run", scenario, "--mode", mode, "--out", tmp_path / mode) == 0
    a = [r[0] for r in csv.reader((tmp_path / "sctsn" / "metrics.csv").open())]
    b = [r[0] for r in csv.reader((tmp_path / "srp" / "metrics.csv").open())]
    assert a == b


def test_rerun_is_byte_identical(scenario, tmp_path):
    for d in ("x", "y"):
        assert run_cli("run", scenario, "--seed", 9, "--out", tmp_path / d) == 0
    assert (tmp_path / "x" / "metrics.csv").read_bytes() == (tmp_path / "y" / "metrics.csv").read_bytes()


def test_env_var_sets_output_directory(scenario, tmp_path, monkeypatch):
    monkeypatch.setenv("SCTSN_OUT", str(tmp_path / "env"))
    assert run_cli("run", scenario) == 0
    assert (tmp_path / "env" / "metrics.csv").is_file()
    # an explicit flag still wins
    assert run_cli("run", scenario, "--out", tmp_path / "flag") == 0
    assert (tmp_path / "flag" / "metrics.csv").is_file()


def test_learn_test_fixtures(fixtures, tmp_path, capsys):
    traces = [fixtures / n for n in ("missing_frame.trace", "late_frame.trace", "noise.trace")]
    assert run_cli("learn-test", *traces, "--out", tmp_path) == 0
    rows = {r["trace"].rsplit("/", 1)[-1]: r for r in csv.DictReader((tmp_path / "learn.csv").open())}
    assert abs(float(rows["missing_frame.trace"]["period_s"]) - 200e-6) <= float(rows["missing_frame.trace"]["bin_width_s"])
    assert abs(float(rows["late_frame.trace"]["period_s"]) - 50e-6) <= float(rows["late_frame.trace"]["bin_width_s"])
    assert rows["noise.trace"]["verdict"] == "BE"
    assert rows["missing_frame.trace"]["verdict"] == "TT"


def test_learn_test_window_and_baseline(fixtures, tmp_path, capsys):
    assert run_cli("learn-test", fixtures / "regime_change.trace", "--window", 16, "--out", tmp_path) == 0
    row = next(csv.DictReader((tmp_path / "learn.csv").open()))
    assert float(row["period_s"]) == pytest.approx(25e-6, abs=float(row["bin_width_s"]))
    assert run_cli("learn-test", fixtures / "regime_change.trace", "--out", tmp_path) == 0
    row = next(csv.DictReader((tmp_path / "learn.csv").open()))
    assert float(row["mean_interarrival_s"]) == pytest.approx(62e-6)


def test_learn_test_malformed_trace(tmp_path, capsys):
    bad = tmp_path / "bad.trace"
    bad.write_text("0.1\n0.2\nabc\n")
    assert run_cli("learn-test", bad, "--out", tmp_path) == 1
    assert ":3:" in capsys.readouterr().err


def test_solve_trivial(fixtures, tmp_path, capsys):
    assert run_cli("solve", fixtures / "trivial.inst", "--out", tmp_path) == 0
    assert "objective 2.0" in capsys.readouterr().out
    res = {r["family"]: float(r["residual"]) for r in csv.DictReader((tmp_path / "residuals.csv").open())}
    assert max(res.values()) <= 1e-9


def test_solve_matches_oracle_on_fixtures(fixtures, tmp_path, capsys):
    for name in ("trivial.inst", "choice.inst"):
        run_cli("solve", fixtures / name, "--out", tmp_path / "a")
        run_cli("solve", fixtures / name, "--oracle", "--out", tmp_path / "b")
        a = (tmp_path / "a" / "solution.csv").read_text().splitlines()[-1]
        b = (tmp_path / "b" / "solution.csv").read_text().splitlines()[-1]
        assert float(a.split(",")[-1]) == pytest.approx(float(b.split(",")[-1]), abs=1e-6)


def test_solve_infeasible_exit_code(fixtures, tmp_path, capsys):
    assert run_cli("solve", fixtures / "infeasible.inst", "--out", tmp_path) == 2
    assert "capacity" in capsys.readouterr().err


def test_validation_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\nmode: warp\n")
    assert run_cli("validate", bad) == 1
    assert run_cli("run", bad, "--out", tmp_path) == 1
    assert run_cli("run", tmp_path / "missing.yaml", "--out", tmp_path) == 1
    topo = tmp_path / "t.topo"
    topo.write_text("[switches]\na\n[links]\na b\n")
    assert run_cli("validate", topo) == 1
    assert "line 4" in capsys.readouterr().err


def test_validate_accepts_bundled_files(fixtures, capsys):
    assert run_cli("validate", fixtures / "trivial.inst", fixtures / "missing_frame.trace") == 0


def test_internal_error_exit_code(scenario, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setattr(cli, "run", boom)
    assert run_cli("run", scenario, "--out", tmp_path) == 3


def test_sweep_rows_and_partial_failure(scenario, tmp_path):
    exp = tmp_path / "exp.yaml"
    exp.write_text("version: 1\nscenario: mini.yaml\n"
                   "axes:\n  be.mean_interarrival: [0.05, 0.1]\n  topology: [line.topo, nowhere]\n"
                   "seeds: [1, 2]\nmodes: [sctsn, srp]\n")
    out = tmp_path / "sw"
    assert run_cli("sweep", exp, "--out", out) == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert len(rows) == 2 * 2 * 2 * 2
    assert sum(r["status"] == "error" for r in rows) == 8
    means = list(csv.DictReader((out / "sweep_mean.csv").open()))
    assert len(means) == 2 * 2
    assert all(r["runs"] == "2" for r in means)


def test_bad_experiment(tmp_path):
    exp = tmp_path / "exp.yaml"
    exp.write_text("version: 1\nscenario: integra\nseeds: [1, 1]\n")
    assert run_cli("sweep", exp, "--out", tmp_path) == 1


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "sctsn.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("run", "sweep", "learn-test", "solve", "validate"):
        assert sub in res.stdout
