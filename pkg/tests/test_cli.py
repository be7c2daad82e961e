from __future__ import annotations

import hashlib
import json
import subprocess
import sys

import pydot
import pytest

from cofcheck import __version__
from cofcheck.algorithms import data_dir
from cofcheck.cli import EXIT_BUDGET, EXIT_ERROR, EXIT_OK, EXIT_VIOLATED, main
from cofcheck.execution import dump_algorithm
from cofcheck.objects import binary_consensus, dump_object
from toys import decide_own_input, lazy_p0


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


# -- conflicts ---------------------------------------------------------------------


def test_conflicts_consensus(capsys):
    code, out, _ = run(capsys, "conflicts", "binary-consensus")
    assert code == EXIT_OK
    assert "propose(0) ≍ propose(1) @ state ⊥" in out


def test_conflicts_counter_and_commuting(capsys):
    assert "read ≍ inc @ state 0" in run(capsys, "conflicts", "--object", "bounded-counter(3)")[1]
    assert "no conflicts" in run(capsys, "conflicts", "commuting-only")[1]


def test_conflicts_from_file_records_digest(capsys, tmp_path):
    path = tmp_path / "consensus.json"
    dump_object(binary_consensus(), path)
    code, doc = run_json(capsys, "conflicts", str(path))
    assert code == EXIT_OK
    assert doc["conflicts"] == [{"pair": ["propose(0)", "propose(1)"], "witness_state": "⊥"}]
    assert doc["inputs"]["object"]["sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()
    assert doc["tool"] == "cofcheck" and doc["version"] == __version__


def test_conflicts_parse_error(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope", encoding="utf-8")
    code, _, err = run(capsys, "conflicts", str(path))
    assert code == EXIT_ERROR and "error" in err


# -- check ---------------------------------------------------------------------------


def test_check_cons2_all_inputs(capsys):
    code, out, _ = run(capsys, "check", "cons2", "--condition", "cof", "--inputs", "all")
    assert code == EXIT_OK
    assert out.startswith("COF holds for cons2 on 4 input vector(s)")


def test_check_cons2_wait_freedom_fails(capsys):
    code, doc = run_json(capsys, "check", "--algorithm", "cons2", "--condition", "wf", "--inputs", "0,1")
    assert code == EXIT_VIOLATED
    assert doc["verdict"]["holds"] is False
    assert doc["verdict"]["witness"]["cycle"]


def test_check_json_is_deterministic(capsys):
    argv = ("check", "counter-loop", "--condition", "of", "--format", "json")
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    third = run(capsys, *argv, "--parallel", "3")[1]
    assert first == second == third


def test_check_writes_out_file(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, stdout, _ = run(capsys, "check", "cons2", "--format", "json-like", "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    assert json.loads(out.read_text())["verdict"]["holds"] is True


def test_check_budget(capsys):
    code, doc = run_json(capsys, "check", "cons2", "--budget", "10")
    assert code == EXIT_BUDGET
    assert doc["budget_exceeded"]["budget"] == 10


def test_check_budget_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("COFCHECK_BUDGET", "10")
    assert run(capsys, "check", "cons2")[0] == EXIT_BUDGET


@pytest.mark.parametrize(
    "argv",
    [
        ("check", "missing.json"),
        ("check",),
        ("check", "cons2", "--inputs", "0,7"),
        ("check", "cons2", "--budget", "0"),
        ("check", "cons2", "--condition", "lock-free"),
        ("conflicts",),
        ("frobnicate",),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_ERROR


def test_check_algorithm_file(capsys, tmp_path):
    path = tmp_path / "lazy.json"
    dump_algorithm(lazy_p0(), path)
    code, doc = run_json(capsys, "check", str(path), "--condition", "of")
    assert code == EXIT_VIOLATED
    assert doc["inputs"]["algorithm"]["sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()
    assert doc["inputs"]["object"]["path"] == "builtin:binary-consensus"


# -- refute ------------------------------------------------------------------------


def test_refute_safety_failure_names_property(capsys, tmp_path):
    path = tmp_path / "own.json"
    dump_algorithm(decide_own_input(), path)
    code, out, _ = run(capsys, "refute", str(path))
    assert code == EXIT_ERROR
    assert "agreement=False" in out and "no refutation (safety: agreement" in out


def test_refute_premise_failure(capsys, tmp_path):
    path = tmp_path / "lazy.json"
    dump_algorithm(lazy_p0(), path)
    code, doc = run_json(capsys, "refute", str(path))
    assert code == EXIT_ERROR
    assert doc["refutation"]["failure"] == "solo termination of p0 fails"


def test_refute_needs_three_processes(capsys):
    assert run(capsys, "refute", "cons2")[0] == EXIT_ERROR


def test_refute_cons3(capsys, tmp_path):
    dot = tmp_path / "valency.dot"
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, "refute", "cons3-naive", "--dot", str(dot), "--format", "json", "--out", str(out))
    assert code == EXIT_OK
    doc = json.loads(out.read_text())["refutation"]
    assert doc["verified"] and doc["root_tag"] == "1-valent"
    assert doc["premises"]["safety"]["ok"] and doc["premises"]["solo_p0"]["decides"] == "0"
    assert doc["premises"]["initial_valency_bridge"]["holds"]
    assert doc["bivalent_path"] is not None and set(doc["lasso"]["cycle"]) <= {"p1", "p2"}
    assert doc["cross_check"]["agrees"]
    (graph,) = pydot.graph_from_dot_data(dot.read_text())
    assert any(e.get("class") == '"critical"' for e in graph.get_edges())


def test_refute_dot_on_small_candidate(capsys, tmp_path):
    path = tmp_path / "own.json"
    dump_algorithm(decide_own_input(), path)
    code, out, _ = run(capsys, "refute", str(path), "--format", "dot")
    assert code == EXIT_ERROR
    assert pydot.graph_from_dot_data(out)


# -- replay ----------------------------------------------------------------------------


def test_replay_crashed_reader(capsys):
    schedule = data_dir() / "crashed-reader.schedule"
    code, out, _ = run(capsys, "replay", "counter-loop", "--schedule", str(schedule))
    assert code == EXIT_OK
    assert "RES p2 ack" in out and "RES p3 ack" in out
    assert "linearizable: True" in out
    code, doc = run_json(capsys, "replay", "counter-loop", "--schedule", str(schedule))
    rows = {r["instance"]: r for r in doc["lasso"]["instances"]}
    read = rows["read by p1 #0"]
    assert not read["completes"] and not read["process_correct"]
    assert not read["eventually_conflict_step_contention_free"]
    assert rows["inc by p2 #0"]["completes"] and rows["inc by p2 #0"]["eventually_conflict_step_contention_free"]
    assert doc["inputs"]["schedule"]["sha256"] == hashlib.sha256(schedule.read_bytes()).hexdigest()


def test_replay_empty_schedule(capsys, tmp_path):
    path = tmp_path / "empty.schedule"
    path.write_text("# nothing\n", encoding="utf-8")
    code, doc = run_json(capsys, "replay", "cons2", "--schedule", str(path))
    assert code == EXIT_OK
    assert doc["trace"] == [] and doc["history"] == [] and doc["linearizable"] is True


def test_replay_unknown_process(capsys, tmp_path):
    path = tmp_path / "bad.schedule"
    path.write_text("p0\np7\n", encoding="utf-8")
    assert run(capsys, "replay", "cons2", "--schedule", str(path))[0] == EXIT_ERROR
    assert run(capsys, "replay", "cons2", "--schedule", str(tmp_path / "none"))[0] == EXIT_ERROR


def test_replay_cycle_that_does_not_close(capsys, tmp_path):
    path = tmp_path / "open.schedule"
    path.write_text("CYCLE:\np0\n", encoding="utf-8")
    code, doc = run_json(capsys, "replay", "cons2", "--inputs", "0,1", "--schedule", str(path))
    assert code == EXIT_ERROR and doc["lasso"] is None


# -- catalog and entry point --------------------------------------------------------------


def test_catalog(capsys):
    code, doc = run_json(capsys, "catalog")
    assert code == EXIT_OK
    assert [a["name"] for a in doc["algorithms"]] == ["cons2", "counter-swsr", "cons3-naive", "counter-loop"]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "cofcheck.cli", "conflicts", "bounded-counter(2)"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "read ≍ inc @ state 0" in proc.stdout
