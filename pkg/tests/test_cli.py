import csv
import io
import json

import pytest

from ssbfs.cli import CSV_COLUMNS, ExperimentSpec, main, run_trial
from ssbfs.model import legitimate_configuration, save_configuration, save_topology
from ssbfs.topologies import named_graph, path


def _rows(text):
    lines = text.splitlines()
    assert lines[0] == "# ssbfs-trials v1"
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_simulate_p3_rounds_to_al(capsys):
    code = main(["simulate", "--topology", "path:3", "--daemon", "sync", "--stop", "Al", "--trials", "100"])
    rows = _rows(capsys.readouterr().out)
    assert code == 0
    assert len(rows) == 100
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert all(int(r["rounds_to_Al"]) <= 16 * 3 - 13 + 4 * 3 * 9 for r in rows)
    assert [int(r["seed"]) for r in rows] == list(range(100))


def test_simulate_p2_construction(capsys):
    assert main(["simulate", "--topology", "path:2", "--stop", "constructions:1", "--trials", "5"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert {r["construction_rounds"] for r in rows} == {"5"}
    assert all(int(r["max_moves_per_process"]) <= 3 for r in rows)


def test_zero_trials_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--topology", "path:3", "--trials", "0"])
    assert exc.value.code == 2


def test_same_seed_same_bytes(tmp_path, capsys):
    args = ["simulate", "--topology", "random:8,0.3", "--daemon", "dist-random:0.4", "--seed", "17", "--trials", "6"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_structured_output_and_trace(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    code = main([
        "simulate", "--topology", "cycle:5", "--daemon", "round-robin", "--stop", "A4",
        "--format", "structured", "--trace", str(trace), "--trials", "2",
    ])
    assert code == 0
    recs = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [r["seed"] for r in recs] == [0, 1]
    assert all(r["violations"] == [] and r["stop_reason"] == "target-attractor-reached" for r in recs)
    first = json.loads(trace.read_text().splitlines()[0])
    assert first["trial"] == 0 and first["step"] == 1


def test_budget_exhaustion_exits_nonzero(capsys):
    code = main(["simulate", "--topology", "path:6", "--stop", "constructions:3", "--max-steps", "5"])
    assert code == 1
    assert len(_rows(capsys.readouterr().out)) == 1


def test_bad_topology_is_usage_error(capsys):
    assert main(["simulate", "--topology", "moebius:4"]) == 2


def test_run_trial_is_isolated():
    spec = ExperimentSpec("path:4", 3, "central-random", 5, "Al")
    assert run_trial(spec, 2).row == run_trial(spec, 2).row
    assert run_trial(spec, 2).row["seed"] == 7


def test_check_p2_basics(capsys):
    assert main(["check", "--graph", "p2", "--suite", "basics"]) == 0
    out = capsys.readouterr().out
    assert "PASS  liveness (some process enabled): 0 violations / 960 checked" in out


def test_check_p3_closures_reports_unsafe_finding(capsys):
    # not-unsafe fails from configurations holding a Faulty child, see README
    assert main(["check", "--graph", "p3", "--suite", "closures"]) == 1
    out = capsys.readouterr().out
    assert "PASS  closure not-faulty: 0 violations" in out
    assert "PASS  closure not-illegal-live-root: 0 violations" in out
    assert "FAIL  closure not-unsafe: 1896 violations" in out
    assert "PASS  closure not-unsafe (steps from A1): 0 violations" in out


@pytest.mark.parametrize("suite", ["recovery", "stages", "languages"])
def test_check_other_suites(suite, capsys):
    assert main(["check", "--graph", "star4", "--suite", suite, "--trials", "7"]) == 0
    assert "FAIL" not in capsys.readouterr().out


@pytest.fixture
def triangle_files(tmp_path):
    t = named_graph("triangle")
    save_topology(t, tmp_path / "t.json")
    save_configuration(legitimate_configuration(t), tmp_path / "c.json")
    return tmp_path / "t.json", tmp_path / "c.json"


def test_pack_triangle(triangle_files, capsys):
    t, c = triangle_files
    assert main(["pack", "--config", str(c), "--topology", str(t)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[:3] == [f"node {u}: degree 2, 9 bits" for u in range(3)]
    assert out[-1] == "total: 27 bits"


def test_pack_p2(tmp_path, capsys):
    t = path(2)
    save_topology(t, tmp_path / "t.json")
    save_configuration(legitimate_configuration(t), tmp_path / "c.json")
    assert main(["pack", "--config", str(tmp_path / "c.json"), "--topology", str(tmp_path / "t.json")]) == 0
    assert capsys.readouterr().out.splitlines() == ["node 0: degree 1, 7 bits", "node 1: degree 1, 7 bits", "total: 14 bits"]


def test_pack_corrupt_file_names_line(triangle_files, tmp_path, capsys):
    t, _ = triangle_files
    bad = tmp_path / "bad.json"
    bad.write_text('{"0": {"P": null,\n  oops\n')
    assert main(["pack", "--config", str(bad), "--topology", str(t)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_predicates_table(triangle_files, capsys):
    t, c = triangle_files
    assert main(["predicates", "--config", str(c), "--topology", str(t)]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [r["node"] for r in rows] == [0, 1, 2]
    assert rows[0]["EndLastPhase"] and rows[0]["Ok"]
