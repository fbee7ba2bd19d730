import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from blockflip import linalg
from blockflip.cli import main, parse_operator
from blockflip.statefile import read_state, write_state
from blockflip.states import DecompositionTerm, SeparableDecomposition


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def files(tmp_path):
    paths = {}
    for kind in ("mixed", "product", "separable", "factorizable"):
        paths[kind] = tmp_path / f"{kind}.json"
        assert main(["state", kind, "--seed", "1", "--out", str(paths[kind])]) == 0
    return paths


def test_demo_entangling_scan(capsys):
    assert main(["demo", "--lambdas", "0.7,0.1,0.1,0.1", "--a", "0.9", "--t-max", "1", "--steps", "20"]) == 0
    out = capsys.readouterr().out
    assert "\r" not in out
    rows = _csv(out)
    assert list(rows[0]) == ["t", "negativity_mix", "ppt_mix", "negativity_semigroup", "ppt_semigroup",
                             "closed_form_max_dev"]
    assert len(rows) == 21
    assert float(rows[0]["negativity_mix"]) == 0.0
    assert max(float(r["negativity_mix"]) for r in rows) > 0
    assert max(float(r["closed_form_max_dev"]) for r in rows) < 1e-12


def test_demo_maximally_mixed_and_invalid(capsys):
    assert main(["demo", "--lambdas", "0.25,0.25,0.25,0.25", "--a", "0.5", "--steps", "5"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert all(float(r["negativity_mix"]) == 0 and float(r["negativity_semigroup"]) == 0 for r in rows)
    # lambda_1 == lambda_4, closed-form columns are left empty
    assert all(r["closed_form_max_dev"] == "" for r in rows)
    assert main(["demo", "--lambdas", "0.5,0.5,0.1,0.1"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["demo", "--lambdas", "a,b"]) == 2


def test_check_exit_codes(files, tmp_path, capsys):
    assert main(["check", str(files["product"])]) == 0
    out = capsys.readouterr().out
    assert "factorizes: True" in out
    residual = float(next(l for l in out.splitlines() if l.startswith("residual")).split(":")[1])
    assert residual <= 1e-10
    assert main(["check", str(files["factorizable"])]) == 0
    assert "K_II: 2" in capsys.readouterr().out
    assert main(["check", str(files["separable"])]) == 1
    # rank-deficient reduced state
    e0 = np.diag([1.0, 0.0]).astype(complex)
    bad = tmp_path / "bad.json"
    write_state(bad, (2, 2), decomposition=SeparableDecomposition.from_terms((2, 2), [DecompositionTerm(1.0, np.eye(2) / 2, e0)]))
    assert main(["check", str(bad)]) == 2
    assert main(["check", str(tmp_path / "nope.json")]) == 2


def test_check_tolerance_sources(files, monkeypatch):
    assert main(["check", str(files["separable"]), "--tol", "1.0"]) == 0
    monkeypatch.setenv("BLOCKFLIP_TOL", "1.0")
    assert main(["check", str(files["separable"])]) == 0
    monkeypatch.setenv("BLOCKFLIP_TOL", "abc")
    assert main(["check", str(files["separable"])]) == 2


def test_perturb_nondegenerate_on_maximally_mixed(files, tmp_path, capsys):
    out = tmp_path / "nd.json"
    report = tmp_path / "nd_report.json"
    code = main(["perturb", str(files["mixed"]), "--mode", "nondegenerate", "--epsilon", "0.1",
                 "--seed", "3", "--out", str(out), "--report", str(report)])
    assert code == 0
    state = read_state(out)
    w = np.linalg.eigvalsh(linalg.partial_trace_first(state.rho, state.dims))
    assert np.diff(w).min() > 1e-10
    assert linalg.operator_norm(state.rho - np.eye(4) / 4) < 0.1
    rep = json.loads(report.read_text())
    assert rep["seed"] == 3 and rep["results"]["distance_op"] < 0.1
    assert rep["command"][:2] == ["blockflip", "perturb"]


def test_perturb_nonfactorizable_then_check(files, tmp_path, capsys):
    out = tmp_path / "nf.json"
    assert main(["perturb", str(files["factorizable"]), "--mode", "nonfactorizable", "--epsilon", "0.01",
                 "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert float(next(l for l in text.splitlines() if l.startswith("residual_after")).split(":")[1]) > 0
    assert float(next(l for l in text.splitlines() if l.startswith("distance_op")).split(":")[1]) < 0.01
    assert main(["check", str(out)]) == 1


def test_perturb_invalid(files, tmp_path):
    out = str(tmp_path / "x.json")
    assert main(["perturb", str(files["mixed"]), "--mode", "nondegenerate", "--epsilon", "0", "--out", out]) == 2
    assert main(["perturb", str(files["mixed"]), "--mode", "nonfactorizable", "--epsilon", "0.1", "--out", out]) == 2
    assert main(["perturb", str(files["mixed"]), "--mode", "bogus", "--epsilon", "0.1", "--out", out]) == 2


def test_correlate(files, capsys):
    assert main(["correlate", str(files["product"]), "--F", "z:0,1", "--G", "x:0,1", "--order", "8",
                 "--t", "0,0.5,1"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert [float(r["t"]) for r in rows] == [0.0, 0.5, 1.0]
    assert abs(float(rows[0]["series_re"])) < 1e-13
    assert float(rows[1]["abs_diff"]) < 1e-8
    assert main(["correlate", str(files["separable"]), "--F", "I", "--G", "[[1,0],[0,-1]]", "--t", "0.5"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert all(abs(float(rows[0][k])) < 1e-13 for k in ("series_re", "series_im", "exact_re", "exact_im"))
    assert main(["correlate", str(files["separable"]), "--F", "w:0", "--G", "I"]) == 2
    assert main(["correlate", str(files["separable"]), "--F", "I", "--G", "I", "--order", "9"]) == 2


def test_parse_operator():
    assert np.array_equal(parse_operator("y:0,1", 2), np.array([[0, -1j], [1j, 0]]))
    assert np.array_equal(parse_operator("e:1,0", 2), np.array([[0, 0], [1, 0]]))
    assert np.array_equal(parse_operator("diag:1,2,3", 3), np.diag([1, 2, 3]))
    assert np.array_equal(parse_operator("[[[0,1],[0,0]],[[0,0],[1,0]]]", 2), np.diag([1j, 1]))
    for bad in ("z:0,0", "e:0,5", "diag:1", "[[1]]", "q"):
        with pytest.raises(ValueError):
            parse_operator(bad, 2)


def test_density_command(tmp_path, capsys):
    r1, r2 = tmp_path / "a.json", tmp_path / "b.json"
    args = ["density", "--dims", "2x2", "--trials", "20", "--epsilon", "0.01", "--seed", "7"]
    assert main(args + ["--report", str(r1)]) == 0
    assert "success_fraction: 1.0" in capsys.readouterr().out
    assert main(args + ["--report", str(r2)]) == 0
    a, b = json.loads(r1.read_text()), json.loads(r2.read_text())
    assert a["results"] == b["results"] and a["seed"] == b["seed"] == 7
    assert main(["density", "--trials", "0"]) == 0
    assert main(["density", "--dims", "4x5"]) == 2
    assert main(["density", "--dims", "2by2"]) == 2


def test_help_documents_columns(capsys):
    assert main(["demo", "--help"]) == 0
    text = capsys.readouterr().out
    assert "negativity_semigroup" in text and "closed_form_max_dev" in text
    assert main(["correlate", "--help"]) == 0
    assert "abs_diff" in capsys.readouterr().out


def test_console_entry_point(tmp_path):
    out = tmp_path / "s.json"
    proc = subprocess.run([sys.executable, "-m", "blockflip.cli", "state", "product", "--out", str(out)])
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "blockflip.cli", "check", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "factorizes: True" in proc.stdout
