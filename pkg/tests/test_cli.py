from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from tstatlab.classify import ClassificationVerdict, Verdict
from tstatlab.cli import SCHEMA, parse_dist_file, parse_grid, render_csv, run
from tstatlab.common import SpecError
from tstatlab.dist import Discrete, Mixture

NORMAL = '{"kind": "normal", "mean": 0, "stddev": 1}'
TWO_POINT = '{"kind": "discrete", "atoms": [[0, 0.5], [1, 0.5]]}'
DEGENERATE = '{"kind": "discrete", "atoms": [[1, 1.0]]}'


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, text in [("normal", NORMAL), ("two", TWO_POINT), ("degenerate", DEGENERATE)]:
        p = tmp_path / f"{name}.json"
        p.write_text(text)
        out[name] = str(p)
    return out


def _run(capsys, *argv):
    code = run(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


# --- parsing -------------------------------------------------------------

def test_parse_dist_examples(tmp_path):
    assert parse_dist_file(TWO_POINT) == Discrete([(0, 0.5), (1, 0.5)])
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind":"discrete","atoms":[[0,0.6],[1,0.5]]}')
    with pytest.raises(SpecError, match="probabilities sum to 1.1"):
        parse_dist_file(bad)
    mix = parse_dist_file('{"kind":"mixture","weights":[0.5,0.5],"components":['
                          '{"kind":"normal","mean":0,"stddev":1},'
                          '{"kind":"discrete","atoms":[[1,1.0]]}]}')
    assert isinstance(mix, Mixture) and mix.has_continuous_part


@pytest.mark.parametrize("text", ['{"kind": "gamma"}', "{not json", '{"mean": 1}'])
def test_parse_dist_errors(text):
    with pytest.raises(SpecError):
        parse_dist_file(text)


def test_parse_dist_missing_file(tmp_path):
    with pytest.raises(SpecError, match="cannot read"):
        parse_dist_file(tmp_path / "nope.json")


def test_parse_grid():
    assert parse_grid("2..6", int) == [2, 3, 4, 5, 6]
    assert parse_grid("0.1,0.3", float) == [0.1, 0.3]
    with pytest.raises(SpecError):
        parse_grid("3,2", int)
    with pytest.raises(SpecError):
        parse_grid("", float)


# --- commands ------------------------------------------------------------

def test_classify_example(capsys, files):
    code, out, err = _run(capsys, "classify", "--dist", files["normal"], "--n", "4", "--r", "3",
                          "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "tstatlab/classify/v1"
    (v,) = doc["verdicts"]
    assert v["verdict"] == "Infinite" and v["evidence"][0]["citation"] == "Theorem thm0"
    assert "Theorem thm0" in err
    assert ClassificationVerdict.from_dict(v).verdict is Verdict.INFINITE


def test_classify_json_round_trip(capsys, files):
    code, out, _ = _run(capsys, "classify", "--dist", files["normal"], "--n-grid", "2..5",
                        "--r-grid", "0.5,1,2,4", "--format", "json")
    assert code == 0
    for v in json.loads(out)["verdicts"]:
        back = ClassificationVerdict.from_dict(v)
        assert back.to_dict() == v


def test_geometry_example(capsys):
    code, out, _ = _run(capsys, "geometry", "--mode", "lemma1", "--n-grid", "2..6",
                        "--h-grid", "0.1,0.3,0.5,0.7,0.9")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 25
    assert all(float(r["gap"]) <= 1e-9 and r["pass"] == "true" for r in rows)


def test_simulate_degenerate(capsys, files):
    code, out, _ = _run(capsys, "simulate", "--dist", files["degenerate"], "--n", "3",
                        "--count", "10", "--seed", "1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 10 and all(float(r["t"]) == 0 for r in rows)
    assert list(rows[0]) == SCHEMA["commands"]["simulate"]["csv_columns"]


def test_moments_exact(capsys, files):
    code, out, _ = _run(capsys, "moments", "--dist", files["two"], "--n", "2",
                        "--r-grid", "1,2,5", "--format", "json")
    assert code == 0
    assert [r["value"] for r in json.loads(out)["rows"]] == [0.5, 0.5, 0.5]


def test_conditions(capsys, files):
    code, out, _ = _run(capsys, "conditions", "--dist", '{"kind":"discrete","atoms":[[1,0.5],[2,0.5]]}',
                        "--n", "2", "--r", "1", "--format", "json")
    assert code == 0
    (row,) = json.loads(out)["rows"]
    assert row["cond_ii"] == 0.75 and abs(row["cond_iii"] - 0.25) < 1e-15
    assert abs(row["r_n_delta"] - 0.5) < 1e-15


def test_identity_and_tail(capsys, files):
    code, out, _ = _run(capsys, "identity", "--dist", files["normal"], "--n-grid", "2,3",
                        "--count", "20000", "--seed", "3")
    assert code == 0
    assert all(r["violations"] == "0" for r in csv.DictReader(io.StringIO(out)))
    code, out, _ = _run(capsys, "tail", "--dist", files["normal"], "--n", "3",
                        "--count", "100000", "--seed", "3")
    assert code == 0 and len(list(csv.DictReader(io.StringIO(out)))) == 2


# --- exit codes ----------------------------------------------------------

def test_missing_seed_is_validation_error(capsys, files):
    code, _, err = _run(capsys, "simulate", "--dist", files["normal"], "--n", "3", "--count", "5")
    assert code == 2 and "--seed" in err


def test_bad_distribution_exit_code(capsys):
    code, _, err = _run(capsys, "classify", "--dist",
                        '{"kind":"discrete","atoms":[[0,0.6],[1,0.5]]}', "--n", "2", "--r", "1")
    assert code == 2 and "probabilities sum to 1.1" in err


def test_budget_exit_code(capsys):
    atoms = json.dumps({"kind": "discrete", "atoms": [[k, 0.05] for k in range(1, 21)]})
    code, _, err = _run(capsys, "moments", "--dist", atoms, "--n", "12", "--r", "1",
                        "--mode", "exact")
    assert code == 3 and "Monte Carlo" in err


def test_divergent_target_exit_code(capsys, files):
    code, _, _ = _run(capsys, "convergence", "--dist", files["normal"], "--r", "3",
                      "--n-grid", "3,10", "--count", "1000", "--seed", "1")
    assert code == 2


def test_unknown_command_exits_2():
    proc = subprocess.run([sys.executable, "-m", "tstatlab", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 2


# --- output --------------------------------------------------------------

def test_atomic_out_and_determinism(capsys, files, tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"run{i}.csv"
        code, stdout, _ = _run(capsys, "moments", "--dist", files["normal"], "--n-grid", "3,4",
                               "--r-grid", "1,2", "--count", "20000", "--seed", "9", "--out",
                               str(p))
        assert code == 0 and stdout.startswith("moments:")
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    assert not [f for f in tmp_path.iterdir() if f.name.startswith(".")]


def test_threads_do_not_change_output(capsys, files):
    a = _run(capsys, "neardeg", "--dist", files["normal"], "--n", "3", "--h-grid", "0.3,0.6",
             "--count", "150000", "--seed", "4", "--threads", "1")[1]
    b = _run(capsys, "neardeg", "--dist", files["normal"], "--n", "3", "--h-grid", "0.3,0.6",
             "--count", "150000", "--seed", "4", "--threads", "3")[1]
    assert a == b


def test_schema_covers_every_command():
    from tstatlab.cli import COMMANDS
    assert set(SCHEMA["commands"]) == set(COMMANDS)
    assert render_csv("tail", []) == ",".join(SCHEMA["commands"]["tail"]["csv_columns"]) + "\n"
