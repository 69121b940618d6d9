"""
Scenario runs, manifests, reports and the command-line surface.
"""

import json

import pytest

import scenarios
from cli import EXIT_CONFIG, EXIT_FAILED, EXIT_INCONCLUSIVE, EXIT_PASS, main
from experiment_config import config_from_dict, load_config
from experiment_runner import (
    MANIFEST_NAME,
    RunManifest,
    load_manifest,
    render_report,
    report,
    run,
    write_manifest,
)
from scenarios import RunError, Scenario


def _conservation(tmp_path):
    return {
        "scenario": "conservation",
        "grid": {"box_side": 8.0, "nx": 16, "my": 3, "dt": 0.01},
        "params": {"T": 0.05, "data": "zero", "stride": 1},
        "output_dir": str(tmp_path / "conservation"),
    }


def _combinatorics(tmp_path):
    return {
        "scenario": "resonance_combinatorics",
        "grid": {"box_side": 16.0, "nx": 8, "my": 1, "dt": 0.01},
        "params": {"jmax": 1, "trunc": 2, "weight_jmax": 2, "weight_truncs": [2, 4], "circle_amins": [1, 2]},
        "output_dir": str(tmp_path / "combinatorics"),
    }


def _write_config(tmp_path, payload, name="config_in.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def _files_on_disk(directory):
    return sorted(
        str(p.relative_to(directory)) for p in directory.rglob("*")
        if p.is_file() and p.name != MANIFEST_NAME
    )


def test_conservation_run_with_zero_data_is_inconclusive(tmp_path):
    cfg = config_from_dict(_conservation(tmp_path))
    manifest = run(cfg)
    assert manifest.error is None and not manifest.passed
    assert manifest.status == "INCONCLUSIVE"
    assert manifest.exit_code == EXIT_INCONCLUSIVE
    by_name = {a["name"]: a for a in manifest.assertions}
    assert {"mass_drift", "energy_drift_order", "galilean_covariance_order"} <= set(by_name)
    for name in ("energy_drift_order", "galilean_covariance_order"):
        assert by_name[name]["inconclusive"] and not by_name[name]["passed"]
    assert by_name["mass_drift"]["passed"] and not by_name["mass_drift"]["inconclusive"]
    assert manifest.files == _files_on_disk(cfg.output_dir)
    assert {"config.json", "diagnostics.csv", "diagnostics_half_dt.csv", "initial.wgf", "final.wgf"} <= set(manifest.files)
    stored = load_manifest(cfg.output_dir / MANIFEST_NAME)
    assert stored.config_hash == cfg.config_hash()
    assert stored.assertions == manifest.assertions
    assert stored.status == "INCONCLUSIVE"
    text = render_report(stored)
    assert "status: INCONCLUSIVE" in text
    assert "2 inconclusive" in text
    assert "? energy_drift_order" in text


@pytest.mark.parametrize("coarse,fine,outcome", [
    (4.0e-6, 1.0e-6, "pass"),
    (2.0e-6, 1.0e-6, "fail"),
    (3.0e-15, 1.0e-15, "inconclusive"),
    (4.0e-15, 1.0e-15, "inconclusive"),
    (0.0, 0.0, "inconclusive"),
])
def test_ratio_helpers_separate_floor_from_pass(coarse, fine, outcome):
    for a in (
        scenarios.ratio_in_range("order", coarse, fine, (3.5, 4.5), floor=1e-14),
        scenarios.ratio_at_least("order", coarse, fine, 3.5, floor=1e-14),
    ):
        assert a.passed == (outcome == "pass")
        assert a.inconclusive == (outcome == "inconclusive")
        if a.inconclusive:
            assert "below floor" in a.note


def test_failure_outranks_inconclusive():
    inconclusive = scenarios.ratio_at_least("order", 0.0, 0.0, 3.5, floor=1e-14).to_dict()
    failed = scenarios.at_most("drift", 1.0, 1e-3).to_dict()
    assert RunManifest(assertions=[inconclusive]).status == "INCONCLUSIVE"
    manifest = RunManifest(assertions=[inconclusive, failed])
    assert manifest.status == "FAIL"
    assert manifest.exit_code == EXIT_FAILED
    assert RunManifest(assertions=[inconclusive], error="RunError: boom").status == "FAIL"


def test_resonance_combinatorics_run_passes(tmp_path):
    cfg = config_from_dict(_combinatorics(tmp_path))
    manifest = run(cfg)
    assert manifest.passed
    assert manifest.measurements["triples_in_table"] > 0
    assert {"resonance_counts.csv", "weight_sums.csv", "circle_decay.csv"} <= set(manifest.files)
    assert manifest.files == _files_on_disk(cfg.output_dir)


def test_scenario_failure_is_recorded(tmp_path, monkeypatch):
    def explode(cfg, out_dir, max_steps):
        raise RunError("integrator diverged")

    monkeypatch.setitem(scenarios.SCENARIOS, "conservation", Scenario("conservation", explode, 10, "fails"))
    manifest = run(config_from_dict(_conservation(tmp_path)))
    assert not manifest.passed
    assert manifest.exit_code == 1
    assert "integrator diverged" in manifest.error
    assert manifest.assertions[0]["name"] == "scenario_completed"
    assert manifest.files == ["config.json"]


def test_report_formats(tmp_path):
    cfg = config_from_dict(_combinatorics(tmp_path))
    run(cfg)
    path = cfg.output_dir / MANIFEST_NAME
    text = report(path)
    assert text.splitlines()[0] == "wglab report: resonance_combinatorics"
    assert "status: PASS" in text
    assert "✓ oracle_discrepancies" in text
    payload = json.loads(report(path, "json"))
    assert payload["passed"] is True
    assert payload["header"]["config_hash"] == cfg.config_hash()
    assert report(path) == text
    with pytest.raises(ValueError):
        report(path, "xml")


def test_empty_manifest_report_is_header_only(tmp_path):
    path = write_manifest(tmp_path / MANIFEST_NAME, RunManifest())
    lines = report(path).splitlines()
    assert len(lines) == 4
    assert lines[0] == "wglab report: -"
    assert lines[3] == "status: PASS (0/0 assertions)"
    failed = RunManifest(scenario="x", error="RunError: boom")
    assert "error: RunError: boom" in render_report(failed)


def test_load_manifest_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / "missing.json")
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_manifest(listing)


def test_cli_run_and_report(tmp_path, capsys):
    config_path = _write_config(tmp_path, _combinatorics(tmp_path))
    assert main(["run", str(config_path)]) == EXIT_PASS
    assert "manifest written" in capsys.readouterr().out
    manifest_path = load_config(config_path).output_dir / MANIFEST_NAME
    assert main(["report", str(manifest_path), "--json"]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["passed"] is True


def test_cli_report_of_failed_run_exits_one(tmp_path, capsys):
    path = write_manifest(tmp_path / MANIFEST_NAME, RunManifest(scenario="x", error="RunError: boom"))
    assert main(["report", str(path)]) == EXIT_FAILED
    assert "status: FAIL" in capsys.readouterr().out


def test_cli_config_errors(tmp_path, capsys):
    payload = _conservation(tmp_path)
    payload["grid"]["dt"] = 0
    assert main(["run", str(_write_config(tmp_path, payload))]) == EXIT_CONFIG
    assert "grid.dt" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "nowhere.json")]) == EXIT_CONFIG
    assert main(["report", str(tmp_path / "nowhere.json")]) == EXIT_CONFIG


def test_cli_resonance_enum(capsys):
    assert main(["resonance", "enum", "--j", "0,0", "--trunc", "1"]) == EXIT_PASS
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "j1_a,j1_b,j2_a,j2_b,j3_a,j3_b"
    assert len(lines) == 26
    assert main(["resonance", "enum", "--j", "0,0", "--trunc", "1", "--fast"]) == EXIT_PASS
    assert capsys.readouterr().out.splitlines() == lines
    assert main(["resonance", "enum", "--j", "5,0", "--trunc", "1"]) == EXIT_CONFIG


def test_cli_resonance_weight_sum_and_circle(capsys):
    assert main(["resonance", "weight-sum", "--jmax", "1", "--trunc", "1", "2"]) == EXIT_PASS
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "a,b,trunc,weight_sum"
    assert len(lines) == 1 + 9 * 2
    assert main(["resonance", "circle", "--center2x", "1,1", "--r2x4", "50", "--amin", "1", "2"]) == EXIT_PASS
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "amin,circle_sum,scaled,ratio_to_calibration"
    assert len(lines) == 3
    assert lines[1].endswith(",1.0")


def test_cli_without_command(capsys):
    assert main([]) == EXIT_PASS
    assert main(["resonance"]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["resonance", "enum", "--j", "zero", "--trunc", "1"])
