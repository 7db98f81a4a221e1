import json
import os
from pathlib import Path

import pytest

from opseq import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


GAP = {
    "kind": "gap_check",
    "params": {"K": {"entries": [[0, 0, 1, 0]]}, "T0": {"identity": [-0.5, 0]}},
    "expect": {"ratio": {"value": 0.5, "tol": 1e-12}},
}
HALF_Z = {
    "kind": "composition_dichotomy",
    "params": {"symbol": {"coeffs": [[1, 0.5, 0]]}, "N": 32, "n_max": 40},
    "expect": {"status": "converged", "limit_norm": {"max": 1e-6}},
}
NEHARI = {
    "kind": "nehari",
    "params": {"symbol": {"coeffs": [[-1, 1, 0]]}},
    "expect": {"dist": {"value": 1.0, "tol": 1e-12}},
}


@pytest.mark.parametrize("cfg", [GAP, HALF_Z, NEHARI], ids=["gap", "half_z", "nehari"])
def test_run_examples_exit_zero(tmp_path, cfg):
    p = _write(tmp_path, cfg)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["outcome"] == "ok"
    assert report["statement"] == cli.STATEMENTS[cfg["kind"]]
    assert report["defaults"]["seed"] == 0x5EED and report["defaults"]["N"] == 256


def test_gap_ratio_reported(tmp_path):
    p = _write(tmp_path, GAP)
    cli.main(["run", str(p), "--out", str(tmp_path / "o")])
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["result"]["ratio"] == pytest.approx(0.5, abs=1e-12)
    assert report["params"]["N"] == 256


def test_expect_mismatch_exit_two(tmp_path):
    cfg = dict(NEHARI, expect={"dist": {"value": 2.0, "tol": 1e-12}})
    p = _write(tmp_path, cfg)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["outcome"] == "mismatch"
    cfg = dict(NEHARI, expect={"no.such.key": 1})
    assert cli.main(["run", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o2")]) == 2


def test_input_errors_exit_one(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["validate", str(bad)]) == 1
    cfg = {"kind": "sigma_u", "params": {"theta": {"zeros": [[1.5, 0]]}}}
    assert cli.main(["run", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 1
    out = capsys.readouterr().out
    assert "ERROR" in out


def test_schema_errors_have_pointers(tmp_path, capsys):
    cfg = {"kind": "ess_norm", "params": {"operator": {"toeplitz": {"coeffs": [[0, 1, 0]]}}, "tol": -1}}
    assert cli.main(["validate", str(_write(tmp_path, cfg))]) == 1
    err = capsys.readouterr().err
    assert "/params/tol:" in err
    errs = cli.validate_config({"kind": "bogus", "params": {}})
    assert errs and errs[0].startswith("/kind:")
    errs = cli.validate_config({"kind": "normal_cesaro", "params": {"atoms": [[1, 0, -2]], "x": [[1, 0]]}})
    assert any(e.startswith("/params/atoms/0/2:") for e in errs)
    assert cli.validate_config({"kind": "nehari", "params": {"symbol": {"coeffs": []}}}) == []


def test_validate_ok(tmp_path, capsys):
    assert cli.main(["validate", str(_write(tmp_path, GAP))]) == 0
    assert "valid: gap_check" in capsys.readouterr().out


def test_determinism(tmp_path):
    p = _write(tmp_path, HALF_Z)
    cli.main(["run", str(p), "--out", str(tmp_path / "a")])
    cli.main(["run", str(p), "--out", str(tmp_path / "b")])
    names = sorted(f.name for f in (tmp_path / "a").iterdir())
    assert names == ["report.json", "trace.csv", "trace.dat"]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trace_formats(tmp_path):
    p = _write(tmp_path, HALF_Z)
    cli.main(["run", str(p), "--out", str(tmp_path / "o")])
    lines = (tmp_path / "o" / "trace.csv").read_text().splitlines()
    assert lines[0] == "n,norm,increment,cesaro_norm,truncation_warning"
    assert lines[1] == "0,1.0,,1.0,0"
    dat = (tmp_path / "o" / "trace.dat").read_text().splitlines()
    assert dat[0].startswith("# n norm") and dat[1].split()[2] == "NaN"


def test_distance_table_header(tmp_path):
    cfg = {"kind": "hsc_distance", "params": {"symbol": {"coeffs": [[-2, 1, 0]]}, "n_max": 3}}
    cli.main(["run", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    lines = (tmp_path / "o" / "distances.csv").read_text().splitlines()
    assert lines[0] == "n,dist,violation"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0", "1", "2", "3"]


def test_emit_report_formats(tmp_path):
    p = cli.emit_report((["n", "dist", "violation"], []), "csv", tmp_path / "empty.csv")
    assert p.read_text() == "n,dist,violation\n"
    p = cli.emit_report({"status": "converged", "x": float("nan")}, "json", tmp_path / "v.json")
    assert json.loads(p.read_text()) == {"status": "converged", "x": None}
    with pytest.raises(ValueError):
        cli.emit_report(([], []), "xml", tmp_path / "x")
    assert not [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]


def test_emit_report_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        cli.emit_report({"a": 1}, "json", blocker / "sub" / "r.json")


def test_suite_aggregates(tmp_path, capsys):
    d = tmp_path / "suite"
    d.mkdir()
    _write(d, GAP, "a.json")
    _write(d, dict(NEHARI, expect={"dist": 3.0}), "b.json")
    assert cli.main(["suite", str(d), "--out", str(tmp_path / "o"), "--jobs", "2"]) == 2
    out = capsys.readouterr().out
    assert "PASS a" in out and "FAIL b" in out and "1/2 passed" in out
    _write(d, {"kind": "nope", "params": {}}, "c.json")
    assert cli.main(["suite", str(d), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["suite", str(tmp_path / "nowhere")]) == 1


def test_run_many_with_jobs(tmp_path):
    a, b = _write(tmp_path, GAP, "a.json"), _write(tmp_path, NEHARI, "b.json")
    assert cli.main(["run", str(a), str(b), "--out", str(tmp_path / "o"), "--jobs", "2"]) == 0
    assert (tmp_path / "o" / "a" / "report.json").exists()
    assert (tmp_path / "o" / "b" / "report.json").exists()


def test_shipped_configs_pass(tmp_path):
    assert cli.main(["suite", str(CONFIGS), "--out", str(tmp_path), "--jobs", "4"]) == 0


def test_every_kind_has_config_and_statement():
    kinds = {json.loads(p.read_text())["kind"] for p in CONFIGS.glob("*.json")}
    assert kinds == set(cli.KINDS) == set(cli.RUNNERS) == set(cli.PARAM_SCHEMAS)


# Named results the runner is meant to reach; each must appear in some statement.
IN_SCOPE = [
    "Brown-Halmos", "Feintuch", "A^n T B^n converges in norm", "compact operators vanish",
    "T compact iff", "essential norm", "||K + T0|| >= ||K||/2", "stabilize", "Nehari",
    "increasing union of subspaces", "H^inf + C", "||f(S_theta)||", "lim ||T^n p(T)||",
    "Sigma_u", "mean ergodic", "Cesaro norm convergence iff T = T0 + Q", "Tauberian",
    "converge in norm iff C_phi is compact or the identity", "local spectrum in the closed disk",
    "Katznelson-Tzafriri", "Nf = zf", "(I + T + ... + T^{k-1})/k", "half-plane spectral hypothesis",
    "N^n x converges iff", "P({1}) x",
]


@pytest.mark.parametrize("name", IN_SCOPE)
def test_traceability(name):
    assert any(name in s for s in cli.STATEMENTS.values()), name
