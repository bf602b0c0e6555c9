import io
import json
import subprocess
import sys
from fractions import Fraction


from kecohom import make_case
from kecohom.cli_reporting import (
    EXIT_OK,
    EXIT_REFUSED,
    EXIT_SOLVER,
    REPORT_SCHEMA_VERSION,
    existence_table,
    exception_family,
    main,
)
from kecohom.case_catalog import enumerate_cases


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), stream=buf)
    return code, buf.getvalue()


def run_json(*argv):
    code, out = run(*argv, "--format", "json")
    assert code == EXIT_OK
    return json.loads(out)


def test_catalog_includes_case3_rows():
    labels = {r["label"] for r in run_json("catalog", "--max-rank", "6")["rows"]}
    assert {"case3(4)-CP", "case3(5)-CP", "case3(6)-CP"} <= labels


def test_catalog_kappa_column_matches_table():
    doc = run_json("catalog", "--max-rank", "6")
    assert doc["schema_version"] == REPORT_SCHEMA_VERSION
    for r in doc["rows"]:
        assert r["kappa_matches_table"], r["label"]
    row = next(r for r in doc["rows"] if r["label"] == "case3(4)-CP")
    assert row["kappa_magnitudes"] == ["14"]


def test_catalog_excluded_rows_have_reasons():
    for r in run_json("catalog", "--max-rank", "6")["rows"]:
        if r["status"] != "ProvenKE":
            assert r["reason"], r["label"]


def test_catalog_text_and_filter(tmp_path):
    code, out = run("catalog", "--max-rank", "3", "--cases", "1", "--out-dir", str(tmp_path))
    assert code == 0
    body = out.splitlines()[1:]
    assert len(body) == 4 and all(line.startswith("case1(") for line in body)
    assert (tmp_path / "catalog.txt").read_text().strip() == out.strip()


def test_signtest_all_positive_families():
    doc = run_json("signtest", "--all", "--max-rank", "10")
    assert doc["positive"] == ["case4-Q", "case5-Q"]
    gc = next(r for r in doc["rows"] if r["label"] == "case1(2)-Q")
    assert Fraction(int(gc["value"]["numerator"]), int(gc["value"]["denominator"])) == Fraction(-9, 20)


def test_signtest_bit_identical():
    assert run("signtest", "--all", "--max-rank", "10") == run("signtest", "--all", "--max-rank", "10")


def test_signtest_single_case_text():
    code, out = run("signtest", "--case", "4", "--fiber", "Q")
    assert code == 0
    assert "Positive" in out and "positive: case4-Q" in out


def test_selector_errors():
    assert run("signtest", "--case", "2", "--p", "3")[0] == 1
    assert run("solve", "--case", "1")[0] == 1


def test_solve_gc_all_pass(tmp_path):
    code, out = run("solve", "--case", "1", "--rank", "2", "--fiber", "Q", "--out-dir", str(tmp_path))
    assert code == EXIT_OK, out
    d = tmp_path / "case1(2)-Q"
    rep = json.loads((d / "report.json").read_text())
    assert rep["passed"] and rep["schema_version"] == REPORT_SCHEMA_VERSION
    assert all(c["passed"] for c in rep["profile_checks"]["checks"])
    assert rep["metric_checks"]["passed"]
    for name in ("profile.csv", "profile.json", "metric.csv", "metric.json"):
        assert (d / name).stat().st_size > 0


def test_solve_refuses_condition_d(tmp_path):
    code, out = run("solve", "--case", "2", "--p", "3", "--q", "1", "--out-dir", str(tmp_path))
    assert code == EXIT_REFUSED and "ConditionD" in out
    code, out = run("solve", "--case", "1", "--rank", "2", "--fiber", "CP", "--out-dir", str(tmp_path))
    assert code == EXIT_REFUSED and "ConditionD" in out
    assert not any(tmp_path.iterdir())


def test_solve_refuses_positive_integral_unless_forced(tmp_path):
    code, out = run("solve", "--case", "4", "--fiber", "Q", "--out-dir", str(tmp_path))
    assert code == EXIT_REFUSED and "excluded" in out
    code, out = run("solve", "--case", "4", "--fiber", "Q", "--force", "--out-dir", str(tmp_path))
    assert code == EXIT_SOLVER and "NoBracket" in out


def _vdot1(tmp_path, tol):
    code, _ = run("solve", "--case", "1", "--rank", "2", "--fiber", "Q", "--boundary-tol", tol, "--out-dir", str(tmp_path / tol))
    assert code == EXIT_OK
    return json.loads((tmp_path / tol / "case1(2)-Q" / "report.json").read_text())["V_dot_at_1"]


def test_boundary_tol_probe(tmp_path):
    a, b = _vdot1(tmp_path, "1e-3"), _vdot1(tmp_path, "1e-6")
    assert abs(a - b) <= 1e-2 * abs(b)


def test_config_file_flags_win(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"case": 1, "rank": 2, "fiber": "Q", "hit_tol": 1e-9, "out_dir": str(tmp_path / "a")}))
    code, _ = run("solve", "--config", str(cfg), "--hit-tol", "1e-10")
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "a" / "case1(2)-Q" / "report.json").read_text())
    assert rep["config"]["tolerances"]["hit_tol"] == 1e-10
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"cases": 1}))
    assert run("solve", "--config", str(bad))[0] == 1


def test_report_json_schema():
    doc = run_json("report", "--max-rank", "10")
    assert set(doc) == {"schema_version", "rows", "excluded_families", "all_agree"}
    assert doc["all_agree"]
    keys = {"label", "condition_d", "sign_integral", "sign", "status", "expected_status", "agrees", "excluded", "family"}
    assert all(keys <= set(r) for r in doc["rows"])
    assert doc["excluded_families"] == ["case1(2)-CP", "case2(1,q)-CP", "case4-Q", "case5-Q"]


def test_report_spot_rows():
    rows = {r["label"]: r for r in existence_table(enumerate_cases(5))["rows"]}
    assert rows["case1(2)-Q"]["status"] == "ProvenKE"
    assert rows["case1(2)-CP"]["status"] == "ExcludedConditionD"
    assert rows["case4-Q"]["status"] == "ExcludedPositiveIntegral"


def test_report_empty_catalog():
    doc = run_json("report", "--max-rank", "1")
    assert doc["rows"] == [] and doc["excluded_families"] == []
    code, out = run("report", "--max-rank", "1")
    assert code == 0 and "|" in out


def test_exception_family_labels():
    assert exception_family(make_case(2, (1, 4), "CP")) == "case2(1,q)-CP"
    assert exception_family(make_case(2, (4, 1), "CP")) == "case2(1,q)-CP"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "kecohom", "signtest", "--case", "5", "--fiber", "Q"], capture_output=True, text=True)
    assert r.returncode == 0 and "case5-Q" in r.stdout
