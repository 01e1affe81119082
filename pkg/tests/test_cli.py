import json
from importlib import resources

import jsonschema
import pytest

from uvlag.cli import main


def schema():
    return json.loads(resources.files("uvlag").joinpath("report.schema.json").read_text())


def run_cli(tmp_path, *args, name="out.json"):
    out = tmp_path / name
    code = main(["run", *args, "-o", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def strip_times(report):
    for r in report["records"]:
        r.pop("wall_time_s")
    return report


def test_ulag_core_record(tmp_path):
    code, rep = run_cli(tmp_path, "--problem", "P1", "--check", "ulag-core", "--seed", "0")
    assert code == 0
    jsonschema.validate(rep, schema())
    (rec,) = rep["records"]
    assert rec["check"] == "ulag-core" and rec["verdict"] == "pass"
    assert rec["details"]["samples"][0]["L0"] == 0.0
    assert rep["summary"] == {"pass": 1, "fail": 0, "expected_fail": 0}


def test_p2_expected_failure(tmp_path):
    code, rep = run_cli(tmp_path, "--problem", "P2", "--check", "proxreg", "--rho", "0.5",
                        "--samples", "2000")
    assert code == 0
    (rec,) = rep["records"]
    assert rec["verdict"] == "fail" and rec["expected"] == "fail"
    assert rec["witness"]["x_prime"] == [0.5, 0.0]
    assert rep["summary"]["expected_fail"] == 1


def test_unexpected_verdict_exit_code(tmp_path, monkeypatch):
    import uvlag.suite as suite
    monkeypatch.setitem(suite.EXPECTED_PS_FAILURES, ("P1", "flat"), ["iv"])
    code, rep = run_cli(tmp_path, "--problem", "P1", "--check", "partial-smoothness")
    assert code == 1
    assert any(not r["as_expected"] for r in rep["records"])


@pytest.mark.parametrize("args", [
    ["--problem", "P9"],
    ["--problem", "P1", "--eps", "0.9", "--eps-bar", "0.5"],
    ["--problem", "P1", "--eps", "1.5"],
    ["--problem", "P1", "--eps-bar", "3", "--eps", "2", "--check", "ulag-core"],
    ["--check", "nope"],
    ["--problem", "P1", "--all"],
    ["--problem", "P1", "--grid-n", "10"],
])
def test_usage_errors_exit_2(tmp_path, args, capsys):
    try:
        code = main(["run", *args, "-o", str(tmp_path / "x.json")])
    except SystemExit as exc:
        code = exc.code
    assert code == 2
    assert capsys.readouterr().err


def test_determinism(tmp_path):
    args = ["--problem", "P6", "--problem", "P5", "--check", "tilt", "--check", "qlb",
            "--samples", "50", "--seed", "7"]
    _, a = run_cli(tmp_path, *args, name="a.json")
    _, b = run_cli(tmp_path, *args, name="b.json")
    assert json.dumps(strip_times(a), sort_keys=True) == json.dumps(strip_times(b), sort_keys=True)


def test_records_ordered_and_anchored(tmp_path):
    code, rep = run_cli(tmp_path, "--problem", "P4", "--problem", "P1", "--check", "grad0",
                        "--check", "uv-geometry", "--check", "sets", "--samples", "300")
    assert code == 0
    jsonschema.validate(rep, schema())
    keys = [(r["check"], r["problem"] or "") for r in rep["records"]]
    assert keys == sorted(keys)
    assert all(r["anchor"] for r in rep["records"])
    s = rep["summary"]
    assert s["pass"] + s["fail"] + s["expected_fail"] == len(rep["records"])


def test_stdout_when_no_out(capsys):
    assert main(["run", "--problem", "P4", "--check", "ulag-core"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["schema"] == "uvlag-report/1"


def test_unwritable_output(tmp_path):
    code = main(["run", "--problem", "P4", "--check", "ulag-core", "-o",
                 str(tmp_path / "missing" / "x.json")])
    assert code == 2
