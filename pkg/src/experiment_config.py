"""
Experiment configuration: JSON Schema validation, defaults and range checks
for the scenario configs consumed by the runner.
"""

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from jsonschema import Draft202012Validator

from grids import GridSpec

SCENARIO_NAMES = [
    "conservation",
    "small_data_scattering",
    "ls_approx",
    "euclidean_approx",
    "resonance_combinatorics",
    "strichartz_probe",
    "morawetz_check",
    "resonant_smalldata",
]


class ConfigError(ValueError):
    """Invalid experiment config; pointer is the JSON pointer of the offending key."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(message)
        self.pointer = pointer

    @property
    def dotted(self) -> str:
        return pointer_to_dotted(self.pointer)


def _number(default: float, minimum: Optional[float] = None, exclusive: bool = True, description: str = "") -> Dict[str, Any]:
    schema: Dict[str, Any] = {"type": "number", "default": default}
    if minimum is not None:
        schema["exclusiveMinimum" if exclusive else "minimum"] = minimum
    if description:
        schema["description"] = description
    return schema


def _integer(default: int, minimum: int = 0, description: str = "") -> Dict[str, Any]:
    schema: Dict[str, Any] = {"type": "integer", "minimum": minimum, "default": default}
    if description:
        schema["description"] = description
    return schema


def _boolean(default: bool) -> Dict[str, Any]:
    return {"type": "boolean", "default": default}


def _numbers(default: Sequence[float], min_items: int = 1, item: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {
        "type": "array",
        "items": item or {"type": "number"},
        "minItems": min_items,
        "default": list(default),
    }


def _range(default: Sequence[float]) -> Dict[str, Any]:
    return {
        "type": "array",
        "items": {"type": "number"},
        "minItems": 2,
        "maxItems": 2,
        "default": list(default),
    }


def _index_pair(default: Sequence[int]) -> Dict[str, Any]:
    return {
        "type": "array",
        "items": {"type": "integer"},
        "minItems": 2,
        "maxItems": 2,
        "default": list(default),
    }


def _object(properties: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "object", "properties": properties, "additionalProperties": False}


NONLINEARITY = {"enum": [0, 1], "default": 1, "description": "0 switches the cubic term off"}

GRID_SCHEMA = {
    "type": "object",
    "properties": {
        "box_side": {"type": "number", "exclusiveMinimum": 0, "description": "Side L of the periodic R^2 box"},
        "nx": {"type": "integer", "minimum": 8, "description": "Points per R^2 direction (power of two)"},
        "my": {"type": "integer", "minimum": 1, "description": "Modes per torus direction (odd)"},
        "dt": {"type": "number", "exclusiveMinimum": 0, "description": "Time step"},
        "torus_period": {"type": "number", "exclusiveMinimum": 0, "description": "Torus period, 2*pi by default"},
    },
    "required": ["box_side", "nx", "my", "dt"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "scenario": {"enum": SCENARIO_NAMES},
        "grid": GRID_SCHEMA,
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0, "default": 0},
        "output_dir": {"type": "string", "minLength": 1, "default": "output"},
    },
    "required": ["scenario", "grid"],
    "additionalProperties": False,
}

PARAM_SCHEMAS: Dict[str, Dict[str, Any]] = {
    "conservation": _object({
        "T": _number(1.0, 0, description="Horizon"),
        "data": {"enum": ["random", "zero"], "default": "random"},
        "amplitude": _number(0.5, 0, exclusive=False, description="H^1 norm of the initial data"),
        "band": _number(4.0, 0, description="Spectral radius of the random data"),
        "stride": _integer(10, 1),
        "dealias": _boolean(False),
        "nonlinearity": NONLINEARITY,
        "mass_tol": _number(1e-10, 0),
        "momentum_tol": _number(1e-8, 0),
        "energy_ratio_range": _range([3.5, 4.5]),
        "drift_floor": _number(1e-14, 0),
        "rescale_lambda": _number(2.0, 0),
        "rescale_tol": _number(1e-10, 0),
        "boost_index": _index_pair([1, 0]),
        "covariance_floor": _number(1e-10, 0),
        "checkpoint": _boolean(True),
    }),
    "small_data_scattering": _object({
        "amplitude": _number(0.01, 0, description="H^1 norm of the initial packet"),
        "width": _number(2.0, 0),
        "torus_weight": _number(0.5, 0, exclusive=False),
        "times": _numbers([4.0, 8.0, 16.0, 32.0], min_items=2),
        "sample_interval": _number(1.0, 0),
        "dealias": _boolean(True),
        "nonlinearity": NONLINEARITY,
    }),
    "ls_approx": _object({
        "Ms": _numbers([0.5, 0.25], min_items=1),
        "T0": _number(0.5, 0),
        "trunc": _integer(1, 0),
        "amplitude": _number(0.5, 0),
        "torus_weight": _number(1.0, 0, exclusive=False),
        "sample_interval": _number(0.05, 0),
        "dealias": _boolean(True),
        "nonlinearity": NONLINEARITY,
        "residual_ratio_range": _range([1.5, 2.5]),
    }),
    "euclidean_approx": _object({
        "Ns": _numbers([4.0, 8.0], min_items=1),
        "R": _number(1.0, 0),
        "T0": _number(0.25, 0),
        "euclidean_box": {
            "type": "object",
            "properties": {
                "box_side": _number(16.0, 0),
                "n": _integer(32, 8),
            },
            "additionalProperties": False,
            "default": {},
        },
        "amplitude": _number(1.0, 0),
        "width": _number(1.0, 0),
        "stride": _integer(1, 1),
        "dealias": _boolean(True),
        "nonlinearity": NONLINEARITY,
        "growth_bound": _number(2.0, 0),
    }),
    "resonance_combinatorics": _object({
        "jmax": _integer(5, 0),
        "trunc": _integer(8, 0),
        "weight_jmax": _integer(16, 0),
        "weight_truncs": _numbers([16, 32, 64], min_items=2, item={"type": "integer", "minimum": 0}),
        "circle_center2x": _index_pair([1, 1]),
        "circle_r4": _integer(50, 0),
        "circle_amins": _numbers([1.0, 2.0, 4.0, 8.0], min_items=1),
    }),
    "strichartz_probe": _object({
        "p": _number(4.0, 10.0 / 3.0),
        "shells": _numbers([1, 2, 4, 8, 16], min_items=1, item={"type": "integer", "minimum": 1}),
        "calibration_shells": _numbers([1, 2], min_items=1, item={"type": "integer", "minimum": 1}),
        "seed_count": _integer(20, 1),
        "window_count": _integer(8, 1),
        "samples_per_window": _integer(16, 1),
        "ratio_bound": _number(5.0, 0),
    }),
    "morawetz_check": _object({
        "T": _number(0.5, 0),
        "amplitude": _number(1.0, 0),
        "width": _number(1.0, 0),
        "boost_index": _index_pair([2, 0]),
        "torus_weight": _number(0.5, 0, exclusive=False),
        "R": _number(3.0, 0),
        "sample_time": _number(0.25, 0),
        "dealias": _boolean(False),
        "nonlinearity": NONLINEARITY,
        "ratio_min": _number(3.5, 0),
    }),
    "resonant_smalldata": _object({
        "trunc": _integer(2, 0),
        "drift_amplitude": _number(0.3, 0),
        "drift_T": _number(1.0, 0),
        "drift_dt": _number(0.02, 0),
        "drift_ratio_range": _range([14.0, 18.0]),
        "drift_floor": _number(1e-14, 0),
        "reduction_tol": _number(1e-10, 0),
        "scattering_trunc": _integer(1, 0),
        "amplitude": _number(0.01, 0),
        "width": _number(2.0, 0),
        "times": _numbers([4.0, 8.0, 16.0, 32.0], min_items=2),
        "sample_interval": _number(4.0, 0),
        "dealias": _boolean(True),
        "nonlinearity": NONLINEARITY,
    }),
}


# ---------------------------------------------------------------------------
# Pointers
# ---------------------------------------------------------------------------

def to_pointer(parts: Sequence[Union[str, int]]) -> str:
    """RFC 6901 pointer for a path of keys/indices."""
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def pointer_to_dotted(pointer: str) -> str:
    if not pointer:
        return "<root>"
    parts = [p.replace("~1", "/").replace("~0", "~") for p in pointer.split("/")[1:]]
    return ".".join(parts)


def _error_location(error, prefix: Sequence[Union[str, int]]) -> Tuple[str, str]:
    parts = list(prefix) + list(error.absolute_path)
    detail = error.message
    if error.validator == "additionalProperties" and isinstance(error.instance, dict):
        allowed = set(error.schema.get("properties", {}))
        extras = sorted(k for k in error.instance if k not in allowed)
        if extras:
            parts.append(extras[0])
            detail = f"unknown key '{extras[0]}'"
    elif error.validator == "required" and isinstance(error.instance, dict):
        missing = [k for k in error.validator_value if k not in error.instance]
        if missing:
            parts.append(missing[0])
            detail = f"missing required key '{missing[0]}'"
    return to_pointer(parts), detail


def _validate(schema: Dict[str, Any], payload: Any, prefix: Sequence[Union[str, int]] = ()):
    errors = sorted(
        Draft202012Validator(schema).iter_errors(payload),
        key=lambda e: (len(e.absolute_path), [str(p) for p in e.absolute_path]),
    )
    if errors:
        pointer, detail = _error_location(errors[0], prefix)
        raise ConfigError(f"{pointer_to_dotted(pointer)}: {detail}", pointer)


def _with_defaults(schema: Dict[str, Any], payload: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(payload)
    for key, sub in schema.get("properties", {}).items():
        if key not in out and "default" in sub:
            out[key] = copy.deepcopy(sub["default"])
        if sub.get("type") == "object" and isinstance(out.get(key), dict):
            out[key] = _with_defaults(sub, out[key])
    return out


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment config with every default filled in."""
    scenario: str
    grid: GridSpec
    params: Dict[str, Any]
    seed: int
    output_dir: Path
    normalized: Dict[str, Any]

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form of the normalized config."""
        text = json.dumps(self.normalized, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


_GRID_FIELD = re.compile(r"grid\.(\w+)")


def _build_grid(payload: Dict[str, Any]) -> GridSpec:
    try:
        return GridSpec(**payload)
    except ValueError as e:
        match = _GRID_FIELD.search(str(e))
        pointer = to_pointer(["grid", match.group(1)]) if match else "/grid"
        raise ConfigError(str(e), pointer) from e


def _is_dyadic(value: float) -> bool:
    if value <= 0:
        return False
    exponent = math.log2(value)
    return abs(exponent - round(exponent)) < 1e-12


def _check_monotone(values: Sequence[float], increasing: bool, pointer: str, what: str):
    pairs = list(zip(values, values[1:]))
    ok = all(b > a for a, b in pairs) if increasing else all(b < a for a, b in pairs)
    if not ok:
        order = "increasing" if increasing else "decreasing"
        raise ConfigError(f"{pointer_to_dotted(pointer)}: {what} must be strictly {order}, got {list(values)}", pointer)


def _check_params(scenario: str, params: Dict[str, Any], grid: GridSpec):
    """Cross-field and range checks the schema cannot express."""

    def fail(key: Union[str, Sequence], message: str):
        parts = ["params"] + ([key] if isinstance(key, str) else list(key))
        pointer = to_pointer(parts)
        raise ConfigError(f"{pointer_to_dotted(pointer)}: {message}", pointer)

    for key in ("energy_ratio_range", "residual_ratio_range", "drift_ratio_range"):
        if key in params and not params[key][0] <= params[key][1]:
            fail(key, f"range must be [low, high], got {params[key]}")
    if "times" in params:
        _check_monotone(params["times"], True, "/params/times", "times")
        if params["times"][0] <= 0:
            fail("times", "scattering times must be positive")
    if scenario in ("ls_approx", "resonant_smalldata") and abs(grid.torus_period - 2.0 * math.pi) > 1e-12:
        raise ConfigError("grid.torus_period: this scenario needs a torus period of 2*pi", "/grid/torus_period")

    if scenario == "ls_approx":
        Ms = params["Ms"]
        for i, M in enumerate(Ms):
            if not (0 < M <= 1 and _is_dyadic(M)):
                fail(["Ms", i], f"M must be a power of two in (0, 1], got {M}")
        _check_monotone(Ms, False, "/params/Ms", "Ms")
        if params["trunc"] > grid.torus_radius:
            fail("trunc", f"truncation {params['trunc']} exceeds the torus radius {grid.torus_radius}")
    elif scenario == "euclidean_approx":
        Ns = params["Ns"]
        for i, N in enumerate(Ns):
            if N < 1:
                fail(["Ns", i], f"N must be >= 1, got {N}")
        _check_monotone(Ns, True, "/params/Ns", "Ns")
        if 2.0 * params["R"] > Ns[0]:
            fail("R", f"cutoff radius must satisfy 2R <= N, got R={params['R']} with N={Ns[0]}")
    elif scenario == "resonance_combinatorics":
        if params["jmax"] > params["trunc"]:
            fail("jmax", f"jmax {params['jmax']} exceeds trunc {params['trunc']}")
        truncs = params["weight_truncs"]
        _check_monotone(truncs, True, "/params/weight_truncs", "weight_truncs")
        if truncs[0] < params["weight_jmax"]:
            fail("weight_truncs", f"every truncation must be >= weight_jmax={params['weight_jmax']}")
        for i, A in enumerate(params["circle_amins"]):
            if A < 1:
                fail(["circle_amins", i], f"cutoff must be >= 1, got {A}")
    elif scenario == "strichartz_probe":
        for key in ("shells", "calibration_shells"):
            for i, N in enumerate(params[key]):
                if not _is_dyadic(N):
                    fail([key, i], f"shell must be a power of two, got {N}")
    elif scenario == "morawetz_check":
        if not params["sample_time"] < params["T"]:
            fail("sample_time", f"sample time must lie inside (0, T), got {params['sample_time']}")
        if 2.0 * params["R"] >= grid.box_side / 2.0:
            fail("R", f"Virial cutoff 2R = {2.0 * params['R']} does not fit the half box {grid.box_side / 2.0}")
    elif scenario == "resonant_smalldata":
        for key in ("trunc", "scattering_trunc"):
            if params[key] > grid.torus_radius:
                fail(key, f"truncation {params[key]} exceeds the torus radius {grid.torus_radius}")
        for i, t in enumerate(params["times"]):
            if abs(t / params["sample_interval"] - round(t / params["sample_interval"])) > 1e-9:
                fail(["times", i], f"time {t} is not a multiple of sample_interval {params['sample_interval']}")
    if scenario == "small_data_scattering":
        for i, t in enumerate(params["times"]):
            if abs(t / params["sample_interval"] - round(t / params["sample_interval"])) > 1e-9:
                fail(["times", i], f"time {t} is not a multiple of sample_interval {params['sample_interval']}")


def config_from_dict(payload: Any, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    Validate a decoded config and fill in defaults.

    Args:
        payload: Decoded JSON document
        base_dir: Directory that relative output_dir values resolve against

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: With the JSON pointer of the first offending key
    """
    _validate(CONFIG_SCHEMA, payload)
    scenario = payload["scenario"]
    params_schema = PARAM_SCHEMAS[scenario]
    params = payload.get("params", {})
    _validate(params_schema, params, prefix=["params"])

    grid = _build_grid(payload["grid"])
    params = _with_defaults(params_schema, params)
    _check_params(scenario, params, grid)

    normalized = _with_defaults(CONFIG_SCHEMA, payload)
    normalized["params"] = params
    normalized["grid"] = {k: v for k, v in grid.to_dict().items() if k != "kind"}

    output_dir = Path(normalized["output_dir"])
    if not output_dir.is_absolute() and base_dir is not None:
        output_dir = Path(base_dir) / output_dir
    return ExperimentConfig(
        scenario=scenario,
        grid=grid,
        params=params,
        seed=int(normalized["seed"]),
        output_dir=output_dir,
        normalized=normalized,
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate a JSON experiment config.

    Relative output_dir values resolve against the config file's directory.

    Raises:
        ConfigError: If the file is missing, is not JSON, or fails validation
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config is not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}") from e
    return config_from_dict(payload, base_dir=path.parent)


def schema_defaults(scenario: str) -> Dict[str, Any]:
    """Default parameter set of a scenario."""
    if scenario not in PARAM_SCHEMAS:
        raise ValueError(f"Unknown scenario: {scenario}")
    return _with_defaults(PARAM_SCHEMAS[scenario], {})


def list_scenarios() -> List[str]:
    return list(SCENARIO_NAMES)
