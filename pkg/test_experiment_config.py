"""
Config validation, defaults and pointers.
"""

import json
import math
from pathlib import Path

import pytest

from experiment_config import (
    ConfigError,
    config_from_dict,
    list_scenarios,
    load_config,
    pointer_to_dotted,
    schema_defaults,
    to_pointer,
)


def _payload(**overrides):
    payload = {
        "scenario": "conservation",
        "grid": {"box_side": 8.0, "nx": 16, "my": 3, "dt": 0.01},
    }
    payload.update(overrides)
    return payload


def test_minimal_config_gets_defaults():
    cfg = config_from_dict(_payload())
    assert cfg.scenario == "conservation"
    assert cfg.seed == 0
    assert cfg.params["T"] == 1.0
    assert cfg.params["energy_ratio_range"] == [3.5, 4.5]
    assert cfg.grid.torus_period == pytest.approx(2.0 * math.pi)
    assert cfg.normalized["params"] == cfg.params
    assert cfg.normalized["output_dir"] == "output"


@pytest.mark.parametrize(
    "payload, pointer",
    [
        (_payload(grid={"box_side": 8.0, "nx": 16, "my": 3, "dt": 0}), "/grid/dt"),
        (_payload(grid={"box_side": 8.0, "nx": 12, "my": 3, "dt": 0.01}), "/grid/nx"),
        (_payload(grid={"box_side": 8.0, "nx": 16, "my": 4, "dt": 0.01}), "/grid/my"),
        (_payload(colour="red"), "/colour"),
        (_payload(params={"T": 1.0, "speed": 2}), "/params/speed"),
        (_payload(params={"stride": 0}), "/params/stride"),
        ({"grid": {"box_side": 8.0, "nx": 16, "my": 3, "dt": 0.01}}, "/scenario"),
        (_payload(scenario="nbody"), "/scenario"),
    ],
)
def test_errors_carry_the_offending_pointer(payload, pointer):
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict(payload)
    assert excinfo.value.pointer == pointer
    assert str(excinfo.value).startswith(pointer_to_dotted(pointer))


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="unknown key 'colour'"):
        config_from_dict(_payload(colour="red"))
    with pytest.raises(ConfigError, match="missing required key 'scenario'"):
        config_from_dict({"grid": {"box_side": 8.0, "nx": 16, "my": 3, "dt": 0.01}})


def test_cross_field_checks():
    grid = {"box_side": 2.0 * math.pi, "nx": 16, "my": 3, "dt": 0.01}
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"scenario": "ls_approx", "grid": grid, "params": {"Ms": [0.25, 0.5]}})
    assert excinfo.value.pointer == "/params/Ms"
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"scenario": "ls_approx", "grid": grid, "params": {"Ms": [0.3]}})
    assert excinfo.value.pointer == "/params/Ms/0"
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"scenario": "ls_approx", "grid": grid, "params": {"trunc": 2}})
    assert excinfo.value.pointer == "/params/trunc"
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"scenario": "euclidean_approx", "grid": grid, "params": {"R": 4.0}})
    assert excinfo.value.pointer == "/params/R"
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"scenario": "resonance_combinatorics", "grid": grid, "params": {"jmax": 9}})
    assert excinfo.value.pointer == "/params/jmax"
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"scenario": "small_data_scattering", "grid": grid, "params": {"times": [4.0, 2.0]}})
    assert excinfo.value.pointer == "/params/times"


def test_ls_approx_needs_two_pi_torus():
    grid = {"box_side": 8.0, "nx": 16, "my": 3, "dt": 0.01, "torus_period": 3.0}
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"scenario": "ls_approx", "grid": grid})
    assert excinfo.value.pointer == "/grid/torus_period"


def test_config_hash_is_stable_and_sensitive():
    a = config_from_dict(_payload())
    b = config_from_dict(_payload(params={"T": 1.0}))
    c = config_from_dict(_payload(seed=3))
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 64


def test_load_config_resolves_output_dir(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(_payload(output_dir="results/a")))
    cfg = load_config(path)
    assert cfg.output_dir == tmp_path / "results" / "a"
    absolute = tmp_path / "elsewhere"
    path.write_text(json.dumps(_payload(output_dir=str(absolute))))
    assert load_config(path).output_dir == absolute


def test_load_config_failures(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{\"scenario\": ")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(broken)


def test_scenario_listing_and_defaults():
    names = list_scenarios()
    assert len(names) == 8 and "resonant_smalldata" in names
    for name in names:
        assert isinstance(schema_defaults(name), dict)
    assert schema_defaults("strichartz_probe")["p"] == 4.0
    with pytest.raises(ValueError):
        schema_defaults("nbody")


def test_pointer_helpers():
    assert to_pointer(["params", "a/b", 0]) == "/params/a~1b/0"
    assert pointer_to_dotted("/params/a~1b/0") == "params.a/b.0"
    assert pointer_to_dotted("") == "<root>"


@pytest.mark.parametrize("path", sorted((Path(__file__).parent / "configs").glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = load_config(path)
    assert cfg.scenario == path.stem


def test_resonant_smalldata_config_uses_the_acceptance_grid():
    cfg = load_config(Path(__file__).parent / "configs" / "resonant_smalldata.json")
    assert cfg.grid.nx == 64
    assert cfg.params["trunc"] == 2
    assert cfg.grid.my >= 2 * cfg.params["trunc"] + 1
