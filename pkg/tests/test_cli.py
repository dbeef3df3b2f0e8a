import csv
import io
import json

import pytest

from dualbrain.cli import main


def run(tmp_path, *argv):
    return main(["run", *argv, "--out", str(tmp_path)])


def test_case_study_run_and_replay(tmp_path, capsys):
    assert run(tmp_path, "three_pillars", "--policy", "scripted-casestudy", "--seed", "7") == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["success"] is True
    assert metrics["decisions"] == {"forward": 2, "hold": 1, "right": 1}
    capsys.readouterr()
    assert main(["replay", str(tmp_path / "mission_log.jsonl")]) == 0
    out = capsys.readouterr()
    assert "identical" in out.err
    rows = list(csv.reader(io.StringIO(out.out)))
    assert rows[0][:3] == ["step", "phase", "t"] and len(rows) > 4 * 50


def test_replay_detects_tampering(tmp_path, capsys):
    run(tmp_path, "empty")
    m = json.loads((tmp_path / "metrics.json").read_text())
    m["steps"] += 1
    (tmp_path / "metrics.json").write_text(json.dumps(m, sort_keys=True, indent=2) + "\n")
    assert main(["replay", str(tmp_path / "mission_log.jsonl"), "--csv", str(tmp_path / "traj.csv")]) == 1
    assert (tmp_path / "traj.csv").exists()


def test_sbm_degraded_exits_abort(tmp_path):
    assert run(tmp_path, "--scenario", "degraded", "--policy", "sbm-geometric") == 2


def test_budget_exit(tmp_path):
    assert run(tmp_path, "three_pillars", "--max-steps", "1") == 3


def test_malformed_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("name = 'x'\n[tank\n")
    assert run(tmp_path / "out", str(bad)) == 1
    err = capsys.readouterr().err
    assert "bad.toml" in err and "line" in err


def test_unknown_key_and_policy(tmp_path, capsys):
    src = (tmp_path / "s.toml")
    src.write_text(
        'name = "s"\ninstruction = "go forward 1 m"\n'
        "[tank]\nx_min = -1\nx_max = 3\ny_min = -1\ny_max = 1\n"
        "[start]\nx = 0\ny = 0\ntheta = 0\n"
        "[hydro]\nmass = 10\nwings = 2\n"
    )
    assert run(tmp_path / "out", str(src)) == 1
    assert "wings" in capsys.readouterr().err
    assert run(tmp_path / "out", "empty", "--policy", "psychic") == 1
    assert run(tmp_path / "out", "empty", "--policy", "external") == 1
    assert run(tmp_path / "out", "empty", "--policy", "scripted-nothing") == 1


def test_unreachable_planner_exit(tmp_path):
    assert run(tmp_path, "empty", "--policy", "external", "--endpoint", "http://127.0.0.1:9/x", "--timeout-s", "0.5") == 5


def test_sweep_table(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "empty", "--policy", "geometric", "sbm-geometric",
        "--seeds", "0-1", "--set", "turbidity=0.5,5", "--workers", "1", "--out", str(out),
    ])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert [int(r["cell"]) for r in rows] == list(range(8))
    assert {r["policy"] for r in rows} == {"geometric", "sbm-geometric"}
    assert {r["turbidity"] for r in rows} == {"0.5", "5"}
    assert "success" in capsys.readouterr().err


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", "three_pillars", "--policy", "geometric", "--seeds", "0,1"]
    main(args + ["--workers", "1", "--out", str(tmp_path / "a.csv")])
    main(args + ["--workers", "2", "--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_sweep_bad_grid(tmp_path):
    assert main(["sweep", "empty", "--set", "turbidity"]) == 1
    assert main(["sweep", "empty", "--seeds", "a-b"]) == 1


@pytest.mark.parametrize("argv", [["run"], ["sweep"]])
def test_missing_scenario(argv):
    assert main(argv) == 1
