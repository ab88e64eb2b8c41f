import csv
import io
import json

import pytest

from gridrestore.cli import BACKEND, FAILED, OK, USAGE, main
from gridrestore.decision import encode_key


@pytest.fixture(scope="module")
def solved_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("anchors")
    assert main(["solve", "anchors", "--out", str(out)]) == OK
    return out


def test_solve_writes_all_artifacts(solved_dir):
    names = sorted(p.name for p in solved_dir.iterdir())
    assert names == ["report.json", "series.csv", "summary.txt", "trace.json"]


def test_report_content(solved_dir):
    doc = json.loads((solved_dir / "report.json").read_text())
    assert doc["status"] == "converged"
    assert doc["validated"]["feasible"]
    assert doc["series"][-1]["cumulative_cost"] == pytest.approx(doc["validated"]["objective"], rel=1e-6)
    assert doc["itineraries"]["RC1"][0]["task"] == "L3"
    assert "timings" not in json.dumps(doc)


def test_series_csv_matches_report(solved_dir):
    doc = json.loads((solved_dir / "report.json").read_text())
    rows = list(csv.DictReader(io.StringIO((solved_dir / "series.csv").read_text())))
    assert len(rows) == len(doc["series"])
    for row in rows:
        assert 0.0 <= float(row["restored_critical_fraction"]) <= 1.0


def test_validate_accepts_its_own_report(solved_dir, capsys):
    assert main(["validate", "anchors", str(solved_dir / "report.json")]) == OK
    out = json.loads(capsys.readouterr().out)
    assert out["feasible"] and out["violations"] == []


def test_validate_flags_a_tampered_schedule(solved_dir, tmp_path, capsys):
    doc = json.loads((solved_dir / "report.json").read_text())
    doc["schedule"][encode_key(("wMS", "L5", 9))] = 1
    doc["schedule"][encode_key(("w", "L5", 9))] = 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", "anchors", str(bad)]) == FAILED
    assert any("manual_close" in v for v in json.loads(capsys.readouterr().out)["violations"])


def test_garbled_schedule_is_usage(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schedule": {"not a key": 1}}))
    assert main(["validate", "anchors", str(bad)]) == USAGE


def test_report_subcommand(solved_dir, tmp_path, capsys):
    assert main(["report", str(solved_dir / "report.json"), "--out", str(tmp_path)]) == OK
    assert capsys.readouterr().out.startswith("slot,minute,")
    assert (tmp_path / "summary.txt").exists()


def test_export_model(tmp_path, capsys):
    assert main(["export-model", "anchors", "--out", str(tmp_path)]) == OK
    assert {p.name for p in tmp_path.iterdir()} == {"model.lp", "blocks.npz", "blocks.json"}
    sizes = json.loads(capsys.readouterr().out)
    assert all(v >= 0 for v in sizes.values())


def test_oracle_refuses_a_large_instance(capsys):
    assert main(["enumerate-oracle", "desk"]) == FAILED
    assert json.loads(capsys.readouterr().err)["error"] == "refused"


def test_unknown_subcommand_is_usage():
    assert main(["frobnicate"]) == USAGE


def test_missing_instance_is_usage(capsys):
    assert main(["solve", "/no/such/file.json"]) == USAGE
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_bad_tolerance_is_usage():
    assert main(["solve", "anchors", "--tol", "0"]) == USAGE


def test_malformed_instance_is_usage(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"network": {}}')
    assert main(["solve", str(f)]) == USAGE


def test_unknown_backend_is_rejected_by_argparse():
    assert main(["solve", "anchors", "--backend", "nope"]) == USAGE


def test_exit_code_values():
    assert (OK, FAILED, USAGE, BACKEND) == (0, 1, 2, 3)
