"""
Tests for the scenario schema
"""
import pytest
from astropy.table import Table

from mesoed.cli import EXPERIMENTS
from mesoed.util.schema import SECTIONS, ScenarioSchema

REQUIRED_ENTRIES = ("description", "type", "required", "default", "valid_values", "minimum", "maximum")


def test_schema_loads():
    schema = ScenarioSchema()
    assert schema.version == "1.0"
    for section in SECTIONS:
        assert section in schema.schema


@pytest.mark.parametrize("section", SECTIONS)
def test_every_key_is_described(section):
    for key, info in ScenarioSchema().section(section).items():
        for entry in REQUIRED_ENTRIES:
            assert entry in info, f"{section}.{key} is missing '{entry}'"
        assert info["type"] in ("str", "int", "float", "bool", "list", "object")


def test_experiment_kinds_match_cli():
    assert ScenarioSchema().experiment_kinds == list(EXPERIMENTS)


def test_unknown_section():
    with pytest.raises(KeyError):
        ScenarioSchema().section("bogus")


def test_defaults():
    schema = ScenarioSchema()
    grid = schema.defaults("grid")
    assert grid == {"n_modes": 1, "t0": 0.0}
    assert "dt" not in grid
    assert schema.defaults("scenario")["n_reps"] == 1000


def test_apply_defaults_does_not_share_state():
    schema = ScenarioSchema()
    completed = schema.apply_defaults("scenario", {"experiment": "dress"})
    completed["devices"].append({"id": "x"})
    assert schema.defaults("scenario")["devices"] == []


def test_apply_defaults_keeps_given_values():
    completed = ScenarioSchema().apply_defaults("grid", {"dt": 0.5, "n_steps": 4, "n_modes": 3})
    assert completed == {"dt": 0.5, "n_steps": 4, "n_modes": 3, "t0": 0.0}


def test_scenario_template():
    template = ScenarioSchema.scenario_template()
    assert set(template.keys()) == {"grid", "experiment"}
    assert set(template["grid"].keys()) == {"dt", "n_steps"}


def test_info():
    info = ScenarioSchema.info()
    assert isinstance(info, Table)
    assert info.colnames[0] == "Key"
    assert "experiment" in info["Key"]

    grid_info = ScenarioSchema.info(section="grid", key="dt")
    assert len(grid_info) == 1
    assert grid_info["type"][0] == "float"
    assert bool(grid_info["required"][0])


def test_info_unknown_key():
    with pytest.raises(KeyError):
        ScenarioSchema.info(key="not_a_key")


def test_missing_schema_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ScenarioSchema._load_yaml_data(str(tmp_path / "missing.yaml"))
