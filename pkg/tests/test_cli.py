import json
import os
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from hamalg.cli import main
from hamalg.report import Report, emit_report
from hamalg.scenario import bundled_names, expected_report_path

NAMES = sorted(bundled_names())


def run(*args, env=None):
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "hamalg", *args], capture_output=True, env=e)


@pytest.fixture(scope="module")
def report_schema():
    return json.loads(resources.files("hamalg").joinpath("schema", "report.schema.json")
                      .read_text())


@pytest.fixture(scope="module")
def fresh():
    return {n: run(n, "--format", "json") for n in NAMES}


def test_exit_codes(capsys):
    assert main(["rotation_R2", "--suite", "structure"]) == 0
    assert main(["broken_pi_R3", "--suite", "akz"]) == 1
    assert main(["rotation_R2", "--suite", "foo"]) == 2
    assert main(["no_such_scenario"]) == 2
    assert main(["rotation_R2", "--box", "2,1"]) == 2
    assert main(["rotation_R2", "--samples", "0"]) == 2


def test_broken_pi_akz_records_residual(capsys):
    main(["broken_pi_R3", "--suite", "akz", "--format", "json"])
    rep = json.loads(capsys.readouterr().out)
    me = next(c for c in rep["checks"] if c["check_id"] == "graded.master_equation")
    assert me["status"] == "fail" and me["max_residual"] > 1e-3


def test_list(capsys):
    assert main(["--list"]) == 0
    assert capsys.readouterr().out.split() == NAMES


def test_human_one_line_per_check(capsys):
    main(["so3_coadjoint", "--suite", "structure"])
    out = capsys.readouterr().out.splitlines()
    rep = json.loads(emit_report_for("so3_coadjoint", "structure"))
    body = [ln for ln in out if ln.split()[0] in ("PASS", "FAIL", "SKIPPED:PRECONDITION")]
    assert len(body) == len(rep["checks"])
    for c in rep["checks"]:
        assert sum(c["check_id"] in ln for ln in body) == 1


def emit_report_for(name, suite):
    from hamalg.scenario import load_scenario
    from hamalg.suites import run_suite
    return emit_report(run_suite(load_scenario(name), suite), "json")


def test_empty_report(report_schema):
    data = json.loads(emit_report(Report("empty", "all")))
    assert data["checks"] == [] and data["all_passed"]
    jsonschema.validate(data, report_schema)
    with pytest.raises(ValueError):
        emit_report(Report("x", "all"), "xml")


def test_report_file_and_timing(tmp_path, report_schema):
    p = tmp_path / "r.json"
    assert main(["rotation_R2", "--suite", "dirac", "--format", "json", "--timing",
                 "--report", str(p)]) == 0
    data = json.loads(p.read_text())
    jsonschema.validate(data, report_schema)
    assert all("wall_time" in c for c in data["checks"])


@pytest.mark.parametrize("name", NAMES)
def test_golden(name, fresh, report_schema):
    proc = fresh[name]
    got = json.loads(proc.stdout)
    want = json.loads(expected_report_path(name).read_text())
    jsonschema.validate(got, report_schema)
    assert proc.returncode == (0 if want["all_passed"] else 1)
    assert got["summary"] == want["summary"] and got["notes"] == want["notes"]
    assert [c["check_id"] for c in got["checks"]] == [c["check_id"] for c in want["checks"]]
    for g, w in zip(got["checks"], want["checks"]):
        assert (g["status"], g["passed"]) == (w["status"], w["passed"]), g["check_id"]
        if isinstance(w["max_residual"], float):
            assert g["max_residual"] == pytest.approx(w["max_residual"], rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("name", ["so3_coadjoint", "broken_pi_R3"])
def test_python_backend_parity(name, fresh):
    py = run(name, "--format", "json", env={"HAMALG_BACKEND": "python"})
    a, b = json.loads(fresh[name].stdout), json.loads(py.stdout)
    assert py.returncode == fresh[name].returncode
    assert [(c["check_id"], c["status"]) for c in a["checks"]] == \
        [(c["check_id"], c["status"]) for c in b["checks"]]
    for x, y in zip(a["checks"], b["checks"]):
        if isinstance(x["max_residual"], float):
            assert y["max_residual"] == pytest.approx(x["max_residual"], rel=1e-9, abs=1e-13)


def test_byte_identical_repeat(fresh):
    again = run("so3_coadjoint", "--format", "json")
    assert again.stdout == fresh["so3_coadjoint"].stdout


def test_seed_override_changes_samples(capsys):
    main(["rotation_R2", "--suite", "structure", "--format", "json", "--seed", "1"])
    assert json.loads(capsys.readouterr().out)["checks"][0]["seed"] == 1
