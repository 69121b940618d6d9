"""
Scenario execution, run manifests and report rendering.
"""

import json
import os
import tempfile
import time
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from dotenv import load_dotenv

from evolution import MAX_STEPS
from experiment_config import ExperimentConfig
from scenarios import Assertion, ScenarioResult, get_scenario, write_json

load_dotenv()

__version__ = "0.1.0"

VERBOSE = os.getenv("WGLAB_VERBOSE", "false").lower() == "true"

MANIFEST_NAME = "manifest.json"
CONFIG_COPY_NAME = "config.json"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _json_default(value: Any):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


STATUS_EXIT_CODES = {"PASS": 0, "FAIL": 1, "INCONCLUSIVE": 3}
MARKERS = {"PASS": "✓", "FAIL": "✗", "INCONCLUSIVE": "?"}


@dataclass
class RunManifest:
    """Record of one scenario run; written last, atomically."""
    scenario: str = ""
    config_hash: str = ""
    tool_version: str = __version__
    seed: int = 0
    started_at: str = ""
    finished_at: str = ""
    files: List[str] = field(default_factory=list)
    assertions: List[Dict[str, Any]] = field(default_factory=list)
    measurements: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(a.get("passed", False) for a in self.assertions)

    @property
    def status(self) -> str:
        """PASS, FAIL, or INCONCLUSIVE when the only non-passing assertions sat below their floors."""
        if self.passed:
            return "PASS"
        if self.error is None and all(a.get("passed") or a.get("inconclusive") for a in self.assertions):
            return "INCONCLUSIVE"
        return "FAIL"

    @property
    def exit_code(self) -> int:
        return STATUS_EXIT_CODES[self.status]

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        out["status"] = self.status
        return out

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RunManifest":
        known = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def write_manifest(path: Union[str, Path], manifest: RunManifest) -> Path:
    """Write the manifest through a temp file and an atomic replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=".manifest-", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def load_manifest(path: Union[str, Path]) -> RunManifest:
    """
    Read a manifest file.

    Raises:
        FileNotFoundError: If the manifest does not exist
        ValueError: If it is not a JSON object
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Manifest not found: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise ValueError(f"Manifest {path} is not a JSON object")
    return RunManifest.from_dict(payload)


def _snapshot(directory: Path) -> set:
    if not directory.exists():
        return set()
    return {p for p in directory.rglob("*") if p.is_file()}


def run(config: ExperimentConfig) -> RunManifest:
    """
    Execute the configured scenario and write its artifacts and manifest.

    Scenario failures are recorded in the manifest (error set, passed false)
    rather than raised.

    Returns:
        The manifest that was written to output_dir/manifest.json
    """
    scenario = get_scenario(config.scenario)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / MANIFEST_NAME
    before = _snapshot(out_dir) - {manifest_path}

    started_at = _utc_now()
    start = time.time()
    config_copy = write_json(out_dir / CONFIG_COPY_NAME, config.normalized)
    max_steps = min(scenario.max_steps, MAX_STEPS)
    error = None
    try:
        result = scenario.func(config, out_dir, max_steps)
    except (ValueError, RuntimeError) as e:
        error = f"{type(e).__name__}: {e}"
        print(f"✗ Scenario {config.scenario} failed: {e}")
        result = ScenarioResult(assertions=[
            Assertion("scenario_completed", 0.0, 1.0, False, ">=", error),
        ])

    produced = set(result.files) | {config_copy} | (_snapshot(out_dir) - before)
    produced = {Path(p) for p in produced} - {manifest_path}
    files = sorted(
        str(p.relative_to(out_dir)) for p in produced
        if p.exists() and not p.name.startswith(".manifest-")
    )

    manifest = RunManifest(
        scenario=config.scenario,
        config_hash=config.config_hash(),
        seed=config.seed,
        started_at=started_at,
        finished_at=_utc_now(),
        files=files,
        assertions=[a.to_dict() for a in result.assertions],
        measurements=result.measurements,
        error=error,
    )
    write_manifest(manifest_path, manifest)

    elapsed = time.time() - start
    passed = sum(1 for a in result.assertions if a.passed)
    marker = MARKERS[manifest.status]
    if VERBOSE or not manifest.passed:
        print(f"{marker} Scenario {config.scenario} {manifest.status}: {passed}/{len(result.assertions)} assertions passed in {elapsed:.2f}s")
    return manifest


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    return str(value)


def _header(manifest: RunManifest) -> Dict[str, Any]:
    passed = sum(1 for a in manifest.assertions if a.get("passed"))
    return {
        "scenario": manifest.scenario or "-",
        "config_hash": manifest.config_hash or "-",
        "tool_version": manifest.tool_version,
        "status": manifest.status,
        "assertions_passed": passed,
        "assertions_inconclusive": sum(1 for a in manifest.assertions if a.get("inconclusive")),
        "assertions_total": len(manifest.assertions),
    }


def render_report(manifest: RunManifest, fmt: str = "text") -> str:
    """
    Deterministic summary of a manifest.

    Args:
        manifest: Loaded manifest
        fmt: "text" or "json"

    Raises:
        ValueError: If the format is unknown
    """
    header = _header(manifest)
    if fmt == "json":
        payload = {
            "header": header,
            "assertions": manifest.assertions,
            "error": manifest.error,
            "files": manifest.files,
            "passed": manifest.passed,
        }
        return json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    if fmt != "text":
        raise ValueError(f"Unknown report format: {fmt}")

    counts = f"{header['assertions_passed']}/{header['assertions_total']} assertions"
    if header["assertions_inconclusive"]:
        counts += f", {header['assertions_inconclusive']} inconclusive"
    lines = [
        f"wglab report: {header['scenario']}",
        f"config: {header['config_hash']}",
        f"tool version: {header['tool_version']}",
        f"status: {header['status']} ({counts})",
    ]
    if manifest.error:
        lines.append(f"error: {manifest.error}")
    for a in manifest.assertions:
        marker = "✓" if a.get("passed") else "?" if a.get("inconclusive") else "✗"
        line = (
            f"{marker} {a.get('name')}: {_format_value(a.get('value'))} "
            f"{a.get('relation', '<=')} {_format_value(a.get('tolerance'))}"
        )
        if a.get("note"):
            line += f" ({a['note']})"
        lines.append(line)
    return "\n".join(lines)


def report(path: Union[str, Path], fmt: str = "text") -> str:
    """Load a manifest and render it."""
    return render_report(load_manifest(path), fmt)
