import pandas as pd
import pytest

from utils.validators import ScenarioValidator


@pytest.fixture
def validator():
    return ScenarioValidator()


@pytest.fixture
def scenario():
    return {
        "id": "hopf",
        "kind": "hopf",
        "operator": {"measure": {"kind": "fractional_laplacian", "d": 1}},
        "domain": {"variant": "interval", "a": -1.0, "b": 1.0},
        "s_list": [0.3, 0.7],
        "grid": {"h": 0.015625},
    }


def test_valid_scenario(validator, scenario):
    ok, message, stats = validator.validate_scenario_data(scenario)
    assert ok, message
    assert stats["estimated_unknowns"] == 128
    assert stats["estimated_interior"] == 128
    assert stats["s_count"] == 2


@pytest.mark.parametrize("change, fragment", [
    ({"kind": "sweep"}, "Unknown kind"),
    ({"gates": {"nope": 1}}, "Unknown gates"),
    ({"grid": {"h": 0.0}}, "must be positive"),
    ({"s_list": [1.5]}, "InvalidScenario"),
    ({"operator": {"measure": {"kind": "fractional_laplacian", "d": 2}}}, "InvalidScenario"),
])
def test_invalid_scenarios(validator, scenario, change, fragment):
    scenario.update(change)
    ok, message, _ = validator.validate_scenario_data(scenario)
    assert not ok
    assert fragment in message


def test_missing_fields(validator):
    ok, message, _ = validator.validate_scenario_data({"id": "x"})
    assert not ok and "kind" in message
    assert validator.validate_scenario_data({})[0] is False


def test_degenerate_operator_is_refused_for_solves(validator):
    data = {
        "id": "deg",
        "kind": "hopf",
        "operator": {"measure": {"d": 2, "atoms": [[[1.0, 0.0], 1.0], [[-1.0, 0.0], 1.0]]}},
        "domain": {"variant": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "grid": {"h": 0.125},
    }
    ok, message, _ = validator.validate_scenario_data(data)
    assert not ok and "degenerate" in message
    data["kind"] = "whitney"
    assert validator.validate_scenario_data(data)[0]


def test_grid_cap(validator):
    data = {
        "id": "fine",
        "kind": "hopf",
        "operator": {"measure": {"kind": "fractional_laplacian", "d": 2}},
        "domain": {"variant": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "grid": {"h": 0.015625},
    }
    ok, message, stats = validator.validate_scenario_data(data)
    assert not ok and "Grid too fine" in message
    assert stats["estimated_unknowns"] == 128 * 128
    assert stats["estimated_interior"] < 128 * 128


def test_suite_checks(validator, scenario):
    ok, _, stats = validator.validate_suite([scenario, dict(scenario, id="other")])
    assert ok and stats["scenarios"] == 2
    ok, message, _ = validator.validate_suite([scenario, dict(scenario)])
    assert not ok and "Duplicate" in message
    ok, _, stats = validator.validate_suite([scenario, dict(scenario, id="bad", kind="sweep")])
    assert not ok and list(stats["invalid"]) == ["bad"]


def test_report_checks(validator):
    assert not validator.validate_report(pd.DataFrame())[0]
    ok, _, stats = validator.validate_report(pd.DataFrame({"status": ["ok", "ok"]}))
    assert ok and stats["rows"] == 2
    ok, message, stats = validator.validate_report(pd.DataFrame({"status": ["ok", "error"]}))
    assert not ok and stats["error_rows"] == 1


def test_one_dimensional_grids_may_exceed_the_2d_cap(validator, scenario):
    scenario["grid"] = {"h": 1.0 / 8192.0}
    ok, message, stats = validator.validate_scenario_data(scenario)
    assert ok, message
    assert stats["estimated_interior"] == 16384
