import json
import os

import pytest

from core.experiments import KINDS
from main import EXIT_ERROR, EXIT_OK, build_parser, main

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")

WHITNEY = {
    "id": "tiny_whitney",
    "kind": "whitney",
    "operator": {"measure": {"kind": "fractional_laplacian", "d": 2}},
    "domain": {"variant": "ball", "center": [0.0, 0.0], "radius": 1.0},
    "data": {"min_radii": [0.1], "samples": 500},
    "seed": 3,
}


@pytest.fixture
def whitney_file(tmp_path):
    path = tmp_path / "tiny_whitney.json"
    path.write_text(json.dumps(WHITNEY))
    return path


def test_list_kinds(capsys):
    assert main(["list-kinds"]) == EXIT_OK
    out = capsys.readouterr().out
    for kind in KINDS:
        assert kind in out


def test_validate(whitney_file, capsys):
    assert main(["validate", str(whitney_file)]) == EXIT_OK
    assert "Valid whitney scenario" in capsys.readouterr().out


def test_validate_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(WHITNEY, kind="sweep")))
    assert main(["validate", str(bad)]) == EXIT_ERROR
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_ERROR


def test_run_writes_reports(whitney_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(whitney_file), "--out", str(out), "--threads", "1", "--log-level", "warning"]) == EXIT_OK
    meta = json.loads((out / "tiny_whitney.meta.json").read_text())
    assert meta["passed"] is True
    assert (out / "tiny_whitney.csv").is_file()


def test_seed_override(whitney_file, tmp_path):
    out = tmp_path / "seeded"
    assert main(["run", str(whitney_file), "--out", str(out), "--seed", "11"]) == EXIT_OK
    meta = json.loads((out / "tiny_whitney.meta.json").read_text())
    assert meta["scenario"]["seed"] == 11


def test_suite_runs_every_file(tmp_path):
    suite = tmp_path / "suite"
    suite.mkdir()
    for name in ("one", "two"):
        (suite / f"{name}.json").write_text(json.dumps(dict(WHITNEY, id=name)))
    out = tmp_path / "out"
    assert main(["suite", str(suite), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "suite_summary.json").read_text())
    assert summary["passed"] == ["one", "two"]


@pytest.mark.parametrize("name", sorted(os.listdir(SCENARIO_DIR)))
def test_bundled_scenarios_validate(name):
    path = os.path.join(SCENARIO_DIR, name)
    if os.path.isdir(path):
        pytest.skip("domain fragments are not scenarios")
    assert main(["validate", path]) == EXIT_OK


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
