import csv
import json
import subprocess
import sys

import pytest

from balstag.cli import main
from balstag.instance import load_instance


def rows(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    path = d / "inst.json"
    assert main(["generate", "--nodes", "grid:3x3", "--trips", "25", "--seed", "2",
                 "--horizon", "120", "--k", "3", "--out", str(path)]) == 0
    return path


def test_generate_deterministic(tmp_path, small):
    again = tmp_path / "again.json"
    assert main(["generate", "--nodes", "grid:3x3", "--trips", "25", "--seed", "2",
                 "--horizon", "120", "--k", "3", "--out", str(again)]) == 0
    assert again.read_bytes() == small.read_bytes()
    inst = load_instance(small)
    assert inst.n_trips == 25


@pytest.mark.parametrize("argv", [
    ["generate", "--nodes", "grid:3x3", "--trips", "0", "--out", "x.json"],
    ["generate", "--nodes", "hexagon:4", "--trips", "3", "--out", "x.json"],
    ["generate", "--nodes", "grid:3x3", "--trips", "3", "--theta", "1.5", "--out", "x.json"],
    ["validate-vickrey", "--rho-grid", "0.5:1.2:0.1"],
    ["frobnicate"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert not (tmp_path / "x.json").exists()


def test_io_errors(tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["evaluate", "--instance", str(bad), "--solution", str(bad)]) == 3
    assert main(["report", str(tmp_path / "nothing"), "--out", str(tmp_path / "rep")]) == 3


def test_solve_rerun_identical(tmp_path, small):
    for variant in ("rduo", "integ"):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            argv = ["solve", "--instance", str(small), "--variant", variant, "--seed", "3",
                    "--max-iterations", "10", "--out", str(out)]
            assert main(argv) == 0
            outs.append((out / f"solution_{variant}_s3.json").read_bytes())
        assert outs[0] == outs[1]
    produced = {p.name for p in (tmp_path / "a").iterdir()}
    assert {"metrics.csv", "runlog_integ_s3.jsonl", "trips_integ_s3.csv", "arcs_integ_s3.csv",
            "schedule_integ_s3.csv"} <= produced
    first = (tmp_path / "a" / "runlog_integ_s3.jsonl").read_text().splitlines()[0]
    assert first.startswith("# config_hash=")


def test_solve_seed_range_and_evaluate(tmp_path, small, capsys):
    out = tmp_path / "runs"
    assert main(["solve", "--instance", str(small), "--variant", "stag", "--seeds", "0..2",
                 "--preset", "stag", "--max-iterations", "5", "--out", str(out)]) == 0
    metrics = rows(out / "metrics.csv")
    assert [m["seed"] for m in metrics] == ["0", "1", "2"]
    capsys.readouterr()
    assert main(["evaluate", "--instance", str(small), "--solution", str(out / "solution_stag_s1.json"),
                 "--schedule-out", str(tmp_path / "sched.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["cost"] == pytest.approx(float(metrics[1]["cost"]))
    assert rows(tmp_path / "sched.csv")


def test_oracle_variant_and_budget(tmp_path):
    tiny = tmp_path / "tiny.json"
    assert main(["generate", "--nodes", "grid:2x2", "--trips", "2", "--sigma", "0.05", "--k", "1",
                 "--horizon", "20", "--out", str(tiny)]) == 0
    assert main(["solve", "--instance", str(tiny), "--variant", "oracle", "--grid", "1",
                 "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "solution_oracle_s0.json").exists()
    big = tmp_path / "big.json"
    assert main(["generate", "--nodes", "grid:3x3", "--trips", "30", "--out", str(big)]) == 0
    assert main(["solve", "--instance", str(big), "--variant", "oracle", "--grid", "1",
                 "--out", str(tmp_path / "o2")]) == 4


def test_report_tables(tmp_path, small):
    out = tmp_path / "runs"
    for variant in ("rduo", "integ", "bal"):
        assert main(["solve", "--instance", str(small), "--variant", variant, "--seed", "0",
                     "--max-iterations", "5", "--out", str(out)]) == 0
    rep = tmp_path / "rep"
    assert main(["report", str(out), "--out", str(rep)]) == 0
    for name in ("summary.csv", "histograms.csv", "route_choice.csv", "arc_delays.csv", "control_sweep.csv"):
        assert (rep / name).read_text().startswith("# config_hash=")
    choice = rows(rep / "route_choice.csv")
    for variant in ("rduo", "integ", "bal"):
        assert sum(int(r["trips"]) for r in choice if r["variant"] == variant) == 25
    summary = {r["variant"]: r for r in rows(rep / "summary.csv")}
    assert float(summary["rduo"]["mean_reduction_vs_rduo"]) == 0.0


def test_validate_vickrey_csv(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate-vickrey", "--rho-grid", "0.2,0.5", "--n", "20000", "--out", str(out)]) == 0
    table = rows(out)
    assert [float(r["rho"]) for r in table] == [0.2, 0.5]
    for r in table:
        assert float(r["analytic"]) == pytest.approx(float(r["linear"]), rel=1e-12)


def test_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "balstag.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "validate-vickrey" in res.stdout
