import csv
import io
import json
import os
import subprocess
import sys
from types import SimpleNamespace

import pytest

from fairlevel import cli
from fairlevel.analysis import AuditReport
from fairlevel.fairbayes import SolverError
from fairlevel.oracle import OracleError


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_delta_grid_inclusive():
    assert cli.parse_delta_grid("0:1:0.1") == [round(0.1 * i, 12) for i in range(11)]
    assert cli.parse_delta_grid("0.2:0.2:0.1") == [0.2]
    for bad in ("0:1", "a:b:c", "0:1:0", "0.5:0.1:0.1", "0:2:0.5"):
        with pytest.raises(cli.UsageError):
            cli.parse_delta_grid(bad)


def test_solve_stdout(capsys):
    code, out, _ = run(["solve", "--scenario", "two-point-aware", "--notion", "dp",
                        "--regime", "aware", "--delta", "0"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["achieved_risk"] == pytest.approx(0.2)
    assert abs(doc["achieved_dm"]) <= 1e-9


def test_solve_artifacts(tmp_path, capsys):
    code, _, _ = run(["solve", "--scenario", "symmetric-null", "--out", str(tmp_path)], capsys)
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert len(names) == 12
    assert "solve_dp_aware.json" in names and "report_pe_blind.csv" in names


def test_sweep_columns_and_na(tmp_path, capsys):
    code, _, _ = run(["sweep", "--scenario", "two-point-aware", "--notion", "dp",
                      "--regime", "aware", "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = list(csv.reader((tmp_path / "sweep_dp_aware.csv").open()))
    assert tuple(rows[0]) == cli.SWEEP_COLUMNS
    assert len(rows) == 12
    body = [dict(zip(rows[0], r)) for r in rows[1:]]
    gsr0 = [float(r["gsr_0"]) for r in body]
    assert all(a >= b for a, b in zip(gsr0, gsr0[1:]))
    assert all(r["gsr_1"] == "1" for r in body)


def test_sweep_precision_na(capsys):
    # reject-all at delta=0 leaves precision undefined
    code, out, _ = run(["sweep", "--scenario", "blind-separated-high", "--notion", "dp",
                        "--regime", "blind", "--delta", "0"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# dp blind"
    row = dict(zip(lines[1].split(","), lines[2].split(",")))
    assert row["prec_0"] == "NA" and row["prec_1"] == "NA"


def test_validate_pop_file(tmp_path, capsys):
    from fairlevel import load_corpus
    path = tmp_path / "mine.pop.json"
    doc = load_corpus()[0].to_document()
    doc.pop("name")
    path.write_text(json.dumps(doc))
    code, out, _ = run(["validate", "--pop", str(path)], capsys)
    assert code == 0
    assert json.loads(out)["name"] == "mine"


def test_invalid_population_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.pop.json"
    path.write_text(json.dumps({"cells": [{"x": "a", "s": 0, "y": 1, "p": 0.7}]}))
    code, _, err = run(["validate", "--pop", str(path)], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "validation"


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["solve", "--scenario", "two-point-aware", "--param", "eta1"],
    ["solve", "--scenario", "two-point-aware", "--param", "eta1=x"],
    ["solve", "--scenario", "two-point-aware", "--param", "bogus=1"],
    ["solve", "--scenario", "two-point-aware", "--param", "eta1=2"],
    ["solve", "--pop", "missing.pop.json"],
    ["solve", "--scenario", "two-point-aware", "--delta", "1.5"],
    ["solve", "--scenario", "two-point-aware", "--c", "2"],
    ["solve", "--scenario", "nope"],
    ["frobnicate"],
    ["sweep", "--scenario", "two-point-aware", "--delta", "0", "--delta-grid", "0:1:0.5"],
])
def test_usage_errors_exit_1(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1, err
    assert set(json.loads(err)) >= {"error", "message"}


def test_solver_failure_exit_2(monkeypatch, capsys):
    def boom(*a, **k):
        raise SolverError("no feasible multiplier")
    monkeypatch.setattr(cli, "solve", boom)
    code, _, err = run(["solve", "--scenario", "two-point-aware"], capsys)
    assert code == 2 and json.loads(err)["error"] == "solver"


def test_aware_violation_exit_3(monkeypatch, tmp_path, capsys):
    monkeypatch.setattr(AuditReport, "has_aware_violation", property(lambda self: True))
    code, _, _ = run(["audit", "--scenario", "two-point-aware", "--out", str(tmp_path)], capsys)
    assert code == 3
    assert (tmp_path / "audit.json").exists()


def test_certify_failure_exit_4(monkeypatch, capsys):
    def fake(*a, **k):
        return SimpleNamespace(passed=False, gap=0.1,
                               solver=SimpleNamespace(achieved_risk=0.3),
                               oracle=SimpleNamespace(best_risk=0.2))
    monkeypatch.setattr(cli, "certify", fake)
    code, out, _ = run(["certify", "--scenario", "two-point-aware", "--delta", "0"], capsys)
    assert code == 4
    assert out.splitlines()[1].endswith(",false")


def test_oracle_error_exit_4(monkeypatch, capsys):
    def boom(*a, **k):
        raise OracleError("too many units")
    monkeypatch.setattr(cli, "certify", boom)
    code, _, err = run(["certify", "--scenario", "two-point-aware"], capsys)
    assert code == 4 and json.loads(err)["error"] == "certification"


def test_certify_passes(tmp_path, capsys):
    code, _, _ = run(["certify", "--scenario", "blind-separated-low", "--out", str(tmp_path)],
                     capsys)
    assert code == 0
    doc = json.loads((tmp_path / "certify.json").read_text())
    assert doc["failed"] == 0 and len(doc["results"]) == 24


def test_audit_text_echo(tmp_path, capsys):
    code, out, _ = run(["audit", "--scenario", "symmetric-null", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert out == (tmp_path / "audit.txt").read_text()
    doc = json.loads((tmp_path / "audit.json").read_text())
    assert doc["counts"]["violated"] == 0


def test_chart_outputs(tmp_path, capsys):
    code, _, _ = run(["chart", "--scenario", "two-point-aware", "--out", str(tmp_path)], capsys)
    assert code == 0
    svg = (tmp_path / "chart_dp_aware.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    rows = list(csv.DictReader((tmp_path / "chart_dp_aware.csv").open()))
    bayes, fair = rows
    # unconstrained: accept group 1 only; fair at delta=0: accept all
    assert float(bayes["ntr_0"]) == 0.0 and float(bayes["ntr_1"]) == 1.0
    assert float(fair["dm"]) == pytest.approx(0.0, abs=1e-9)
    assert float(bayes["risk"]) == pytest.approx(0.1)
    assert float(fair["risk"]) == pytest.approx(0.2)


def test_chart_several_pairs_need_out(capsys):
    code, _, _ = run(["chart", "--scenario", "two-point-aware", "--notion", "all"], capsys)
    assert code == 1


def _cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "fairlevel", *args], capture_output=True,
                          text=True, env={**os.environ, **(env or {})})


def test_module_entry_and_logging():
    proc = _cli("sweep", "--scenario", "custom-grid", "--notion", "dp", "--regime", "blind",
                env={"FAIRLEVEL_LOG": "debug"})
    assert proc.returncode == 0
    assert "DEBUG" in proc.stderr or "INFO" in proc.stderr
    quiet = _cli("sweep", "--scenario", "custom-grid", "--notion", "dp", "--regime", "blind",
                 env={"FAIRLEVEL_LOG": "not-a-level"})
    assert quiet.returncode == 0 and quiet.stdout == proc.stdout


def test_outputs_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(["audit", "--scenario", "custom-grid", "--out", str(tmp_path / d)],
                   capsys)[0] == 0
    for name in ("audit.json", "audit.csv", "audit.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
