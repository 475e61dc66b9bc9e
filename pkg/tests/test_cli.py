import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qubitjm import cli
from qubitjm.criterion import COUNTEREXAMPLE, Verdict
from qubitjm.povm import Assemblage


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def obs_file(tmp_path, vectors, biases=None, name="obs.json"):
    biases = biases or [0.0] * len(vectors)
    return write(tmp_path, name, {"observables": [{"bias": b, "bloch": list(v)} for b, v in zip(biases, vectors)]})


def xz(eta):
    return [[eta, 0, 0], [0, 0, eta]]


def test_check_counterexample(tmp_path, capsys):
    code = cli.main(["check", obs_file(tmp_path, COUNTEREXAMPLE.tolist()), "--format", "json"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert out["verdict"] == "JointlyMeasurable"
    assert out["objective"] == pytest.approx(7.95738, abs=1e-4)
    assert out["witness"]["valid"]


def test_check_exit_codes(tmp_path, capsys):
    assert cli.main(["check", obs_file(tmp_path, xz(0.8))]) == 1
    assert cli.main(["check", obs_file(tmp_path, xz(0.5))]) == 0
    assert cli.main(["check", obs_file(tmp_path, [[0.2, 0, 0], [0, 0.3, 0]], [0.1, 0.1])]) == 0
    assert "NecessaryHolds" in capsys.readouterr().out


def test_exit_codes_total():
    assert set(cli.EXIT_CODES) == set(Verdict)


@pytest.mark.parametrize("payload", [
    {"observables": []},
    {"nothing": 1},
    {"observables": [{"bias": 0, "bloch": [1, 2]}]},
    {"observables": [{"bias": 0, "bloch": [0.9, 0.9, 0]}]},
    {"observables": [{"bias": 0}]},
    [1, 2, 3],
])
def test_check_bad_input(tmp_path, payload, capsys):
    assert cli.main(["check", write(tmp_path, "bad.json", payload)]) == 64
    assert "error" in capsys.readouterr().err


def test_check_missing_and_malformed_file(tmp_path):
    assert cli.main(["check", str(tmp_path / "nope.json")]) == 64
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert cli.main(["check", str(p)]) == 64


def test_nmax_flag(tmp_path):
    assert cli.main(["check", obs_file(tmp_path, COUNTEREXAMPLE.tolist()), "--nmax", "3"]) == 64
    assert cli.main(["check", obs_file(tmp_path, xz(0.5)), "--nmax", "99"]) == 64


def test_construct(tmp_path, capsys):
    e = 1 / np.sqrt(2)
    out = tmp_path / "w.json"
    assert cli.main(["construct", obs_file(tmp_path, xz(e)), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["even_scalars"]["{1,2}"] == pytest.approx(0, abs=1e-12)
    assert len(doc["effects"]) == 4 and doc["verification"]["valid"]
    assert cli.main(["construct", obs_file(tmp_path, xz(0.9))]) == 1
    assert "refused" in capsys.readouterr().err
    assert cli.main(["construct", obs_file(tmp_path, [[0.1, 0, 0]], [0.2])]) == 64


def test_construct_zero_vectors(tmp_path, capsys):
    assert cli.main(["construct", obs_file(tmp_path, [[0, 0, 0]] * 3)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verification"]["valid"]


def test_sweep_csv(tmp_path, capsys):
    fams = {"families": [{"id": "xz", "directions": [[1, 0, 0], [0, 0, 1]]},
                         {"id": "xyz", "directions": np.eye(3).tolist()},
                         {"id": "xx", "directions": [[1, 0, 0], [1, 0, 0]]}]}
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", write(tmp_path, "f.json", fams), "-o", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == cli.SWEEP_COLUMNS
    got = {r["family_id"]: float(r["eta_star"]) for r in rows}
    assert got["xz"] == pytest.approx(0.70711, abs=1e-5)
    assert got["xyz"] == pytest.approx(0.57735, abs=1e-5)
    assert got["xx"] == 1.0
    assert rows[0]["N"] == "2"


def test_sweep_bare_directions(tmp_path, capsys):
    assert cli.main(["sweep", write(tmp_path, "d.json", {"directions": [[1, 0, 0], [0, 1, 0]]}),
                     "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert float(rows[0]["eta_star"]) == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    assert cli.main(["sweep", write(tmp_path, "e.json", {"directions": [[1, 0]]})]) == 64


def test_repro(capsys):
    assert cli.main(["repro"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 8
    assert "2.01977" in out and "7.95737" in out


def test_steer(tmp_path, capsys):
    def states(v):
        return {"inputs": [{"plus": [0.25, -0.25 * v, 0, 0], "minus": [0.25, 0.25 * v, 0, 0]},
                           {"plus": [0.25, 0, 0, -0.25 * v], "minus": [0.25, 0, 0, 0.25 * v]}]}
    assert cli.main(["steer", write(tmp_path, "a.json", states(0.8))]) == 1
    assert "steerable" in capsys.readouterr().out
    assert cli.main(["steer", write(tmp_path, "b.json", states(0.5))]) == 0
    assert "lhs-model" in capsys.readouterr().out
    bad = states(0.5)
    bad["inputs"][1]["plus"][0] = 0.3
    assert cli.main(["steer", write(tmp_path, "c.json", bad)]) == 64
    assert cli.main(["steer", write(tmp_path, "d.json", {"inputs": [{"plus": [1, 0]}]})]) == 64


def test_oracle_command(tmp_path, capsys):
    assert cli.main(["oracle", obs_file(tmp_path, xz(0.5))]) == 0
    assert cli.main(["oracle", obs_file(tmp_path, xz(0.8))]) == 1
    assert "InfeasibleEvidence" in capsys.readouterr().out


def test_bench(capsys):
    assert cli.main(["bench", "--samples", "2", "--nmax", "3", "--format", "csv", "--seed", "1"]) == 0
    first = capsys.readouterr().out
    assert first.splitlines()[0].startswith("N,")
    assert len(first.splitlines()) == 3


def test_twelve_digits():
    assert cli.fmt(np.pi) == "3.14159265359"
    assert cli._round({"a": [np.float64(1 / 3)]}) == {"a": [0.333333333333]}


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
                          st.floats(-0.1, 0.1)), min_size=1, max_size=6))
def test_assemblage_file_roundtrip(rows):
    a = Assemblage.from_blochs([r[:3] for r in rows], [r[3] for r in rows])
    text = json.dumps(cli.assemblage_to_dict(a))
    assert cli.assemblage_from_dict(json.loads(text)) == a


def test_module_entry_point(tmp_path):
    p = obs_file(tmp_path, xz(0.8))
    run = subprocess.run([sys.executable, "-m", "qubitjm", "check", p], capture_output=True, text=True)
    assert run.returncode == 1 and "Incompatible" in run.stdout
