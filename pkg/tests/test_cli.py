import hashlib
import json
import subprocess
import sys

import pytest

from statediag import __version__
from statediag.cli import main

from .conftest import FIXTURES

KMG = str(FIXTURES / "kmg.mp")
SPEC_Y = str(FIXTURES / "y_below_4.icftl")
SATISFIED = str(FIXTURES / "satisfied.icftl")


def _digest(paths):
    return {p: hashlib.sha256(open(p, "rb").read()).hexdigest() for p in paths}


def test_full_pipeline_diagnose(tmp_path):
    out = tmp_path / "diagnosis.json"
    before = _digest([KMG, SPEC_Y])
    assert main(["diagnose", "--program", KMG, "--spec", SPEC_Y, "--entry", "k", "--out", str(out)]) == 1
    (entry,) = json.loads(out.read_text())
    assert entry["expression"] == "q(y)"
    assert [(s["proc"], s["line"], s["multiplicity"]) for s in entry["slice"]] == [
        ("k", 2, 2), ("k", 4, 2), ("k", 4, 2), ("k", 6, 2), ("m", 9, 1), ("g", 12, 2), ("g", 16, 1), ("g", 18, 1)
    ]
    assert _digest([KMG, SPEC_Y]) == before


def test_default_output_name(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["diagnose", "--program", KMG, "--spec", SPEC_Y, "--entry", "k"]) == 1
    assert (tmp_path / "diagnosis.json").exists()


def test_staged_pipeline_matches_one_shot(tmp_path, capsys):
    plan, trace = tmp_path / "plan.json", tmp_path / "trace.jsonl"
    assert main(["instrument", "--program", KMG, "--spec", SPEC_Y, "--out", str(plan)]) == 0
    points = json.loads(plan.read_text())["q(y)"]["points"]
    assert [(p["proc"], p["line"]) for p in points] == sorted((p["proc"], p["line"]) for p in points)
    assert main(["run", "--program", KMG, "--entry", "k", "--points", str(plan), "--out", str(trace)]) == 0
    assert main(["check", "--trace", str(trace), "--spec", SPEC_Y, "--program", KMG]) == 1
    assert capsys.readouterr().out == "binding#0 q=g:18@1.6 -> false\n"
    staged, oneshot = tmp_path / "d1.json", tmp_path / "d2.json"
    main(["diagnose", "--program", KMG, "--spec", SPEC_Y, "--trace", str(trace), "--plan", str(plan), "--out", str(staged)])
    main(["diagnose", "--program", KMG, "--spec", SPEC_Y, "--entry", "k", "--out", str(oneshot)])
    assert staged.read_bytes() == oneshot.read_bytes()


def test_check_satisfied_exit_zero(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    main(["run", "--program", KMG, "--entry", "k", "--all", "--out", str(trace)])
    assert main(["check", "--trace", str(trace), "--spec", SATISFIED]) == 0
    assert capsys.readouterr().out.endswith("-> true\n")


def test_scfg_dot_is_stable(capsys):
    main(["scfg", "--program", KMG, "--proc", "k", "--dot"])
    first = capsys.readouterr().out
    main(["scfg", "--program", KMG, "--proc", "k", "--dot"])
    assert capsys.readouterr().out == first
    assert "σ6 W={a} R={a,b} C={}" in first


def test_metrics_table(tmp_path, capsys):
    plan, gt = tmp_path / "plan.json", tmp_path / "gt.json"
    main(["instrument", "--program", KMG, "--spec", SPEC_Y, "--out", str(plan)])
    prox = {18: 0, 16: 0, 14: 0, 12: 0, 9: 1, 6: 2, 4: 2, 2: 2}
    procs = {18: "g", 16: "g", 14: "g", 12: "g", 9: "m", 6: "k", 4: "k", 2: "k"}
    gt.write_text(json.dumps([{"proc": procs[ln], "line": ln, "proximity": p} for ln, p in prox.items()]))
    capsys.readouterr()
    assert main(["metrics", "--predicted", str(plan), "--gt", str(gt), "--levels", "0,1,5,inf",
                 "--program", KMG, "--violation", "g"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[1].split() == ["0", "4", "0", "0", "1.000", "1.000"]
    assert rows[4].split() == ["inf", "8", "0", "0", "1.000", "1.000"]


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["check", "--trace", "/nonexistent", "--spec", SPEC_Y])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["diagnose", "--program", KMG, "--spec", SPEC_Y])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_analysis_error_is_structured(tmp_path, capsys):
    bad = tmp_path / "bad.mp"
    bad.write_text("def f(:\n")
    assert main(["scfg", "--program", str(bad)]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["phase"] == "parse" and "line 1" in err["detail"]
    trace = tmp_path / "t.jsonl"
    trace.write_text('{"procedures": ["k"], "labels": {"0": "k"}}\nnot json\n')
    assert main(["check", "--trace", str(trace), "--spec", SPEC_Y]) == 3
    assert json.loads(capsys.readouterr().err)["phase"] == "io"


def test_testkit_gen(tmp_path):
    out = tmp_path / "prog.mp"
    assert main(["testkit", "gen", "--seed", "4", "--out", str(out)]) == 0
    first = out.read_text()
    main(["testkit", "gen", "--seed", "4", "--out", str(out)])
    assert out.read_text() == first and first.startswith("def p0():")


def test_module_entry_point_and_version():
    result = subprocess.run([sys.executable, "-m", "statediag", "--version"], capture_output=True, text=True)
    assert result.returncode == 0 and __version__ in result.stdout
