"""
Scenario registry: each scenario runs one family of checks from a validated
ExperimentConfig, writes its artifacts and returns named assertions.
"""

import csv
import json
import math
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence

import numpy as np
from dotenv import load_dotenv

from grids import EuclideanGridSpec, PlaneGrid
from field_core import (
    WaveguideField,
    ResonantState,
    Trajectory,
    gradient_norm_squared,
    lattice_points,
    norm,
    random_band_limited_field,
    resonant_norms,
    w_norm_estimate,
)
from field_io import write_field
from evolution import (
    MAX_STEPS,
    NlsStepperConfig,
    ResonantStepperConfig,
    evolve_nls,
    evolve_resonant,
    galilean_boost,
    rescale_solution,
    step_resonant,
    step_scalar_nls_2d,
)
from lattice_resonance import (
    ball_points,
    build_resonance_table,
    circle_decay_probe,
    enumerate_resonant_triples,
    enumerate_resonant_triples_fast,
    weight_sum_profile,
)
from diagnostics import (
    ConservedQuantityObserver,
    ResonantObserver,
    VirialConfig,
    conserved_set,
    momentum_identity_residual,
    relative_drift,
    resonant_scattering_extract,
    resonant_trilinear_quotient,
    resonant_z_partial,
    scattering_extract,
    strichartz_probe,
    write_diagnostics_csv,
    z_partial,
    zero_momentum_boost,
)
from approximation import (
    EXPERIMENT_COLUMNS,
    euclidean_approximation_experiment,
    ls_approximation_experiment,
)
from experiment_config import ExperimentConfig

load_dotenv()

DETERMINISTIC = os.getenv("WGLAB_DETERMINISTIC", "0").lower() in ("1", "true")

TINY = 1e-300


class RunError(RuntimeError):
    """A scenario could not be completed."""


# ---------------------------------------------------------------------------
# Assertions and results
# ---------------------------------------------------------------------------

@dataclass
class Assertion:
    """A named numerical claim: value compared against tolerance by relation."""
    name: str
    value: float
    tolerance: Any
    passed: bool
    relation: str = "<="
    note: str = ""
    inconclusive: bool = False

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        if not _finite(self.value):
            out["value"] = str(self.value)
        return out


def _finite(value: float) -> bool:
    return value is not None and math.isfinite(value)


def at_most(name: str, value: float, tol: float, note: str = "") -> Assertion:
    return Assertion(name, float(value), tol, _finite(value) and value <= tol, "<=", note)


def at_least(name: str, value: float, bound: float, note: str = "") -> Assertion:
    return Assertion(name, float(value), bound, _finite(value) and value >= bound, ">=", note)


def ratio_in_range(
    name: str,
    coarse: float,
    fine: float,
    bounds: Sequence[float],
    floor: float = 0.0,
) -> Assertion:
    """
    coarse/fine inside bounds.

    When both values sit at or below the roundoff floor the ratio is noise and
    the assertion is inconclusive whatever its value.
    """
    ratio = coarse / fine if fine > 0 else math.inf
    low, high = bounds
    in_range = _finite(ratio) and low <= ratio <= high
    if max(coarse, fine) <= floor:
        return _below_floor(name, ratio, list(bounds), "in", floor)
    note = f"floor {floor:g}" if floor else ""
    return Assertion(name, float(ratio), list(bounds), in_range, "in", note)


def ratio_at_least(name: str, coarse: float, fine: float, bound: float, floor: float = 0.0) -> Assertion:
    """coarse/fine at least bound; inconclusive when both values are at or below the floor."""
    ratio = coarse / fine if fine > 0 else math.inf
    ok = not math.isnan(ratio) and ratio >= bound
    if max(coarse, fine) <= floor:
        return _below_floor(name, ratio, bound, ">=", floor)
    return Assertion(name, float(ratio), bound, ok, ">=")


def _below_floor(name: str, ratio: float, tolerance: Any, relation: str, floor: float) -> Assertion:
    return Assertion(
        name, float(ratio), tolerance, False, relation,
        f"both values below floor {floor:g}", inconclusive=True,
    )


def strictly_decreasing(name: str, values: Sequence[float]) -> Assertion:
    """Largest consecutive increment must be negative."""
    steps = [b - a for a, b in zip(values, values[1:])]
    worst = max(steps) if steps else -math.inf
    return Assertion(name, float(worst), 0.0, worst < 0, "<", "largest consecutive increment")


@dataclass
class ScenarioResult:
    measurements: Dict[str, Any] = field(default_factory=dict)
    assertions: List[Assertion] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)


@dataclass(frozen=True)
class Scenario:
    name: str
    func: Callable[[ExperimentConfig, Path, int], ScenarioResult]
    max_steps: int
    description: str


SCENARIOS: Dict[str, Scenario] = {}


def register(name: str, max_steps: int, description: str):
    def decorator(func):
        SCENARIOS[name] = Scenario(name, func, max_steps, description)
        return func
    return decorator


def get_scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        raise ValueError(f"Unknown scenario: {name}")
    return SCENARIOS[name]


# ---------------------------------------------------------------------------
# Artifacts and initial data
# ---------------------------------------------------------------------------

def write_rows(path: Path, columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})
    return path


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _experiment_rows(rows) -> List[Dict[str, Any]]:
    out = []
    for row in rows:
        values = row.to_row()
        if DETERMINISTIC:
            values["wall_seconds"] = 0.0
        out.append(values)
    return out


def gaussian_packet(
    spec,
    width: float,
    torus_weight: float = 0.0,
    boost: Sequence[float] = (0.0, 0.0),
) -> WaveguideField:
    """
    e^{-|x|^2 / (2 width^2)} (1 + torus_weight e^{i y1}) e^{i <x, boost>}.

    On a Euclidean box grid the Gaussian runs over all four directions and the
    torus factor is dropped.
    """
    if isinstance(spec, EuclideanGridSpec):
        def func(*z):
            return np.exp(-sum(c ** 2 for c in z) / (2.0 * width ** 2))
        return WaveguideField.from_function(spec, func)

    def func(x1, x2, y1, y2):
        envelope = np.exp(-(x1 ** 2 + x2 ** 2) / (2.0 * width ** 2))
        torus = 1.0 + torus_weight * np.exp(1j * y1)
        return envelope * torus * np.exp(1j * (boost[0] * x1 + boost[1] * x2))

    return WaveguideField.from_function(spec, func)


def _with_h1_norm(f: WaveguideField, target: float) -> WaveguideField:
    current = norm(f, "h1").value
    if current == 0:
        return f
    return f.scaled(target / current)


def plane_packet(grid: PlaneGrid, width: float) -> np.ndarray:
    x1, x2 = grid.meshgrid_coordinates()
    values = np.exp(-(x1 ** 2 + x2 ** 2) / (2.0 * width ** 2))
    return np.broadcast_to(values, grid.shape).astype(np.complex128)


def resonant_packet(trunc: int, grid: PlaneGrid, amplitude: float, width: float, side_weight: float = 0.5) -> ResonantState:
    """Gaussian in x on j = 0 and its four neighbours (|j|_1 = 1), zero elsewhere."""
    base = plane_packet(grid, width)
    components = {}
    for j in lattice_points(trunc):
        order = abs(j[0]) + abs(j[1])
        weight = 1.0 if order == 0 else (side_weight if order == 1 else 0.0)
        components[j] = amplitude * weight * base
    return ResonantState(trunc, grid, components)


def _stride_for(interval: float, dt: float) -> int:
    stride = max(1, int(round(interval / dt)))
    if abs(stride * dt - interval) > 1e-9 * max(1.0, interval):
        raise ValueError(f"Sample interval {interval} is not a multiple of dt={dt}")
    return stride


def _capture(steps: Sequence[int], store: Dict[int, Any]):
    wanted = set(steps)

    def observer(step: int, t: float, state):
        if step in wanted:
            store[step] = state
    return observer


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

@register("conservation", max_steps=100000, description="Conserved quantities, rescaling and Galilean covariance")
def run_conservation(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    spec = cfg.grid
    result = ScenarioResult()
    if p["data"] == "zero":
        f0 = WaveguideField.zeros(spec)
    else:
        f0 = _with_h1_norm(random_band_limited_field(spec, p["band"], cfg.seed), p["amplitude"])

    xi0 = tuple(m * spec.dual_spacing for m in p["boost_index"])
    runs = {}
    for label, dt, stride in (("dt", spec.dt, p["stride"]), ("half_dt", spec.dt / 2.0, 2 * p["stride"])):
        step_cfg = NlsStepperConfig(dt=dt, dealias=p["dealias"], nonlinearity=p["nonlinearity"])
        observer = ConservedQuantityObserver(p["nonlinearity"])
        run = evolve_nls(f0, p["T"], step_cfg, observers=[observer], stride=stride,
                         keep_trajectory=False, max_steps=max_steps)
        records = [observer.initial(f0)] + run.records
        boosted = evolve_nls(galilean_boost(f0, xi0, 0.0), p["T"], step_cfg,
                             keep_trajectory=False, max_steps=max_steps)
        image = galilean_boost(run.final, xi0, run.steps * dt)
        scale = max(norm(f0, "l2").value, TINY)
        runs[label] = {
            "records": records,
            "final": run.final,
            "covariance_gap": norm(boosted.final - image, "l2").value / scale,
        }
        name = "diagnostics.csv" if label == "dt" else "diagnostics_half_dt.csv"
        result.files.append(write_diagnostics_csv(out_dir / name, records))

    records = runs["dt"]["records"]
    masses = [r.mass for r in records]
    energies = [r.energy for r in records]
    fulls = [r.full_energy for r in records]
    c0 = conserved_set(f0, p["nonlinearity"])
    momentum_scale = math.sqrt(max(c0.mass * 2.0 * c0.energy, 0.0))
    momentum_drift = max(
        math.hypot(r.momentum_x1 - records[0].momentum_x1, r.momentum_x2 - records[0].momentum_x2)
        for r in records
    )
    momentum_drift = momentum_drift / momentum_scale if momentum_scale > 0 else momentum_drift
    energy_drift = relative_drift(energies)
    energy_drift_half = relative_drift([r.energy for r in runs["half_dt"]["records"]])

    def spread(series):
        return max(abs(v - series[0]) for v in series)

    result.assertions += [
        at_most("mass_drift", relative_drift(masses), p["mass_tol"]),
        at_most("momentum_drift", momentum_drift, p["momentum_tol"], "normalized by (2 M E)^(1/2)"),
        ratio_in_range("energy_drift_order", energy_drift, energy_drift_half,
                       p["energy_ratio_range"], p["drift_floor"]),
        at_most("full_energy_drift_bound",
                spread(fulls) - (0.5 * spread(masses) + spread(energies)),
                1e-15 * max(abs(fulls[0]), 1.0),
                "|dL| - (|dM|/2 + |dE|)"),
        ratio_at_least("galilean_covariance_order", runs["dt"]["covariance_gap"],
                       runs["half_dt"]["covariance_gap"], 3.5, p["covariance_floor"]),
    ]

    lam = p["rescale_lambda"]
    g, _ = rescale_solution(f0, lam)
    mass0, mass1 = norm(f0, "mass").value, norm(g, "mass").value
    grad0, grad1 = gradient_norm_squared(f0), gradient_norm_squared(g)
    expected_mass = mass0 / lam ** 2
    result.assertions += [
        at_most("rescale_mass_error", abs(mass1 - expected_mass) / max(expected_mass, TINY)
                if expected_mass else abs(mass1), p["rescale_tol"]),
        at_most("rescale_gradient_error", abs(grad1 - grad0) / max(grad0, TINY)
                if grad0 else abs(grad1), p["rescale_tol"]),
    ]

    result.measurements.update({
        "initial": asdict(c0),
        "mass_drift": relative_drift(masses),
        "energy_drift": energy_drift,
        "energy_drift_half_dt": energy_drift_half,
        "momentum_drift": momentum_drift,
        "covariance_gap": runs["dt"]["covariance_gap"],
        "covariance_gap_half_dt": runs["half_dt"]["covariance_gap"],
        "boost": list(xi0),
    })
    if p["checkpoint"]:
        result.files.append(write_field(out_dir / "initial.wgf", f0, {"time": 0.0}))
        result.files.append(write_field(out_dir / "final.wgf", runs["dt"]["final"], {"time": records[-1].time}))
    return result


@register("small_data_scattering", max_steps=20000, description="Cauchy gap and Z-partial decay for small data")
def run_small_data_scattering(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    spec = cfg.grid
    result = ScenarioResult()
    f0 = _with_h1_norm(gaussian_packet(spec, p["width"], p["torus_weight"]), p["amplitude"])
    times = [float(t) for t in p["times"]]
    stride = _stride_for(p["sample_interval"], spec.dt)
    observer = ConservedQuantityObserver(p["nonlinearity"])
    run = evolve_nls(
        f0, 2.0 * times[-1],
        NlsStepperConfig(dt=spec.dt, dealias=p["dealias"], nonlinearity=p["nonlinearity"]),
        observers=[observer], stride=stride, max_steps=max_steps,
    )
    traj = run.trajectory
    rows, gaps, zs = [], [], []
    candidate = None
    for t in times:
        candidate, gap = scattering_extract(traj, t, 2.0 * t)
        z = z_partial(traj, 2.0 * t)
        gaps.append(gap)
        zs.append(z)
        rows.append({"t1": t, "t2": 2.0 * t, "cauchy_gap": gap, "z_partial": z})

    result.files.append(write_diagnostics_csv(out_dir / "diagnostics.csv", [observer.initial(f0)] + run.records))
    result.files.append(write_rows(out_dir / "scattering.csv", ["t1", "t2", "cauchy_gap", "z_partial"], rows))
    result.files.append(write_field(out_dir / "scattering_profile.wgf", candidate, {"pulled_back_from": 2.0 * times[-1]}))
    result.assertions += [
        strictly_decreasing("cauchy_gap_decreasing", gaps),
        strictly_decreasing("z_partial_decreasing", zs),
    ]
    result.measurements.update({
        "initial_h1": norm(f0, "h1").value,
        "cauchy_gaps": gaps,
        "z_partials": zs,
        "horizon": float(traj.times[-1]),
    })
    return result


@register("ls_approx", max_steps=200000, description="Large-scale profiles against the resonant system")
def run_ls_approx(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    result = ScenarioResult()
    psi = gaussian_packet(cfg.grid, 1.0, p["torus_weight"]).scaled(p["amplitude"])
    rows = ls_approximation_experiment(
        psi, p["Ms"], p["T0"], p["trunc"],
        nonlinearity=p["nonlinearity"], dealias=p["dealias"],
        sample_interval=p["sample_interval"], max_steps=max_steps,
    )
    result.files.append(write_rows(out_dir / "experiment.csv", EXPERIMENT_COLUMNS, _experiment_rows(rows)))
    result.files.append(write_field(out_dir / "generator.wgf", psi, {"role": "psi"}))

    if len(rows) > 1:
        result.assertions.append(strictly_decreasing("rel_error_decreasing_in_M", [r.rel_error for r in rows]))
    for coarse, fine in zip(rows, rows[1:]):
        if abs(fine.scale * 2.0 - coarse.scale) < 1e-12:
            result.assertions.append(ratio_in_range(
                f"residual_ratio_M{coarse.scale:g}_to_M{fine.scale:g}",
                coarse.residual_proxy, fine.residual_proxy, p["residual_ratio_range"],
            ))
    result.measurements["rows"] = [r.to_dict() for r in rows]
    return result


@register("euclidean_approx", max_steps=50000, description="Euclidean profiles against the transplanted R^4 flow")
def run_euclidean_approx(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    result = ScenarioResult()
    box = p["euclidean_box"]
    box_grid = EuclideanGridSpec(box_side=box["box_side"], n=box["n"], dt=cfg.grid.dt)
    phi = gaussian_packet(box_grid, p["width"]).scaled(p["amplitude"])
    rows = euclidean_approximation_experiment(
        phi, p["Ns"], p["R"], p["T0"], cfg.grid,
        nonlinearity=p["nonlinearity"], dealias=p["dealias"],
        stride=p["stride"], max_steps=max_steps,
    )
    result.files.append(write_rows(out_dir / "experiment.csv", EXPERIMENT_COLUMNS, _experiment_rows(rows)))
    result.files.append(write_field(out_dir / "generator.wgf", phi, {"role": "phi"}))

    if len(rows) > 1:
        result.assertions.append(strictly_decreasing("rel_error_decreasing_in_N", [r.rel_error for r in rows]))
    for row in rows:
        result.assertions.append(at_most(f"h1_growth_N{row.scale:g}", row.extras["h1_growth"], p["growth_bound"]))
    result.measurements["rows"] = [r.to_dict() for r in rows]
    return result


@register("resonance_combinatorics", max_steps=MAX_STEPS, description="Enumerator oracle, weight sums and circle sums")
def run_resonance_combinatorics(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    result = ScenarioResult()

    discrepancies, duplicates = 0, 0
    count_rows = []
    for a, b in ball_points(p["jmax"]):
        j = (int(a), int(b))
        brute = enumerate_resonant_triples(j, p["trunc"])
        fast = enumerate_resonant_triples_fast(j, p["trunc"])
        discrepancies += len(set(brute) ^ set(fast))
        duplicates += len(fast) - len(set(fast))
        count_rows.append({"a": j[0], "b": j[1], "count": len(fast)})
    table = build_resonance_table(p["trunc"])
    result.files.append(write_rows(out_dir / "resonance_counts.csv", ["a", "b", "count"], count_rows))

    truncs = [int(t) for t in p["weight_truncs"]]
    profile = weight_sum_profile(p["weight_jmax"], truncs)
    weight_rows, not_monotone, not_decaying = [], 0, 0
    for j, values in sorted(profile.items()):
        series = [values[t] for t in truncs]
        increments = [b - a for a, b in zip(series, series[1:])]
        not_monotone += sum(1 for d in increments if d < 0)
        not_decaying += sum(1 for d0, d1 in zip(increments, increments[1:]) if not d1 < d0)
        row = {"a": j.a, "b": j.b}
        row.update({f"trunc_{t}": values[t] for t in truncs})
        weight_rows.append(row)
    result.files.append(write_rows(
        out_dir / "weight_sums.csv", ["a", "b"] + [f"trunc_{t}" for t in truncs], weight_rows,
    ))

    circle = circle_decay_probe(p["circle_center2x"], p["circle_r4"], p["circle_amins"])
    result.files.append(write_rows(
        out_dir / "circle_decay.csv",
        ["amin", "circle_sum", "scaled", "ratio_to_calibration"],
        [asdict(row) for row in circle],
    ))

    result.assertions += [
        at_most("oracle_discrepancies", discrepancies, 0),
        at_most("fast_enumerator_duplicates", duplicates, 0),
        at_least("table_valid", 1.0 if table.validate() else 0.0, 1.0),
        at_most("weight_sum_monotonicity_violations", not_monotone, 0),
        at_most("weight_sum_tail_violations", not_decaying, 0),
    ]
    result.measurements.update({
        "triples_in_table": table.count(),
        "max_weight_sum": max(max(v.values()) for v in profile.values()),
        "circle_calibration": circle[0].scaled if circle else None,
    })
    return result


@register("strichartz_probe", max_steps=MAX_STEPS, description="Windowed Strichartz quotient against its calibration")
def run_strichartz_probe(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    result = ScenarioResult()
    seeds = [cfg.seed + i for i in range(p["seed_count"])]
    summary = strichartz_probe(
        cfg.grid, p["p"], p["shells"], seeds,
        window_count=p["window_count"],
        samples_per_window=p["samples_per_window"],
        calibration_shells=p["calibration_shells"],
    )
    result.files.append(write_json(out_dir / "probe.json", summary.to_dict()))
    result.assertions.append(at_most("quotient_over_calibration", summary.ratio, p["ratio_bound"]))
    result.measurements.update({
        "calibration_max": summary.calibration_max,
        "max_quotient": summary.max_quotient,
        "records": len(summary.records),
    })
    return result


@register("morawetz_check", max_steps=20000, description="Momentum-density identity, Virial bound and Galilean zeroing")
def run_morawetz_check(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    spec = cfg.grid
    result = ScenarioResult()
    xi0 = tuple(m * spec.dual_spacing for m in p["boost_index"])
    f0 = gaussian_packet(spec, p["width"], p["torus_weight"], xi0).scaled(p["amplitude"])
    virial = VirialConfig(R=p["R"])

    residuals, virial_rows = {}, []
    for label, dt in (("dt", spec.dt), ("half_dt", spec.dt / 2.0)):
        centre = int(round(p["sample_time"] / dt))
        store: Dict[int, WaveguideField] = {}
        observers = [_capture([centre - 1, centre, centre + 1], store)]
        monitor = ConservedQuantityObserver(p["nonlinearity"], virial=virial) if label == "dt" else None
        if monitor is not None:
            observers.append(monitor)
        run = evolve_nls(
            f0, p["T"],
            NlsStepperConfig(dt=dt, dealias=p["dealias"], nonlinearity=p["nonlinearity"]),
            observers=observers, keep_trajectory=False, max_steps=max_steps,
        )
        if centre - 1 == 0:
            store[0] = f0
        missing = [n for n in (centre - 1, centre, centre + 1) if n not in store]
        if missing:
            raise RunError(f"Identity sample steps {missing} lie outside the run of {run.steps} steps")
        frames = [store[n] for n in (centre - 1, centre, centre + 1)]
        local = Trajectory(np.array([(centre - 1) * dt, centre * dt, (centre + 1) * dt]), frames)
        residuals[label] = momentum_identity_residual(local, 1, nonlinear=bool(p["nonlinearity"]))
        if monitor is not None:
            records = [monitor.initial(f0)] + [r for r in run.records if r is not None]
            result.files.append(write_diagnostics_csv(out_dir / "diagnostics.csv", records))
            virial_rows = [
                {"step": r.step, "time": r.time, **{k: r.extras[k] for k in ("virial_action", "virial_bound")}}
                for r in records
            ]

    worst = max(
        (abs(r["virial_action"]) / r["virial_bound"] for r in virial_rows if r["virial_bound"] > 0),
        default=0.0,
    )
    result.files.append(write_rows(out_dir / "virial.csv", ["step", "time", "virial_action", "virial_bound"], virial_rows))

    boosted, zeroing = zero_momentum_boost(f0)
    after = conserved_set(boosted)
    residual_momentum = math.hypot(*after.momentum)
    rounding_bound = after.mass * spec.dual_spacing

    result.assertions += [
        at_least("identity_residual_order",
                 residuals["dt"] / residuals["half_dt"] if residuals["half_dt"] > 0 else math.inf,
                 p["ratio_min"]),
        at_most("virial_bound_ratio", worst, 1.0, "max |A_R| / (c R (M E)^(1/2))"),
        at_most("galilean_zeroing_momentum", residual_momentum, rounding_bound),
    ]
    result.measurements.update({
        "identity_residual": residuals["dt"],
        "identity_residual_half_dt": residuals["half_dt"],
        "zeroing_boost": list(zeroing),
    })
    return result


@register("resonant_smalldata", max_steps=40000, description="Resonant-system conservation, reduction and small-data decay")
def run_resonant_smalldata(cfg: ExperimentConfig, out_dir: Path, max_steps: int) -> ScenarioResult:
    p = cfg.params
    plane = cfg.grid.plane()
    result = ScenarioResult()

    # conservation order; dealiasing would break the exact discrete invariants
    table = build_resonance_table(p["trunc"])
    v0 = resonant_packet(p["trunc"], plane, p["drift_amplitude"], p["width"])
    drifts = {}
    for label, dt, stride in (("dt", p["drift_dt"], 1), ("half_dt", p["drift_dt"] / 2.0, 2)):
        observer = ResonantObserver(table, p["nonlinearity"])
        run = evolve_resonant(
            v0, p["drift_T"],
            ResonantStepperConfig(dt=dt, table=table, dealias=False, nonlinearity=p["nonlinearity"]),
            observers=[observer], stride=stride, keep_trajectory=False, max_steps=max_steps,
        )
        records = [observer(0, 0.0, v0)] + run.records
        drifts[label] = {
            "e_ls": relative_drift([r.e_ls_if_resonant for r in records]),
            "h1L2": relative_drift([r.extras["h1L2"] for r in records]),
        }
        if label == "dt":
            result.files.append(write_diagnostics_csv(out_dir / "diagnostics.csv", records))

    # a lone j = 0 component evolves by the scalar 2-D equation
    single = ResonantState.zeros(p["trunc"], plane).with_components({
        j: (plane_packet(plane, p["width"]) * p["drift_amplitude"] if j == (0, 0)
            else np.zeros(plane.shape, dtype=np.complex128))
        for j in lattice_points(p["trunc"])
    })
    stepped = step_resonant(single, ResonantStepperConfig(
        dt=cfg.grid.dt, table=table, dealias=p["dealias"], nonlinearity=p["nonlinearity"],
    ))
    scalar = step_scalar_nls_2d(single.components[(0, 0)], plane, cfg.grid.dt, p["nonlinearity"], p["dealias"])
    reduction_error = float(np.max(np.abs(stepped.components[(0, 0)] - scalar)))
    leakage = max(
        (float(np.max(np.abs(c))) for j, c in stepped.components.items() if j != (0, 0)),
        default=0.0,
    )

    # small-data decay of the Cauchy gap and of the tail W and Z norms
    small_table = build_resonance_table(p["scattering_trunc"])
    w0 = resonant_packet(p["scattering_trunc"], plane, 1.0, p["width"])
    w0 = w0.scaled(p["amplitude"] / resonant_norms(w0, "h1L2"))
    times = [float(t) for t in p["times"]]
    run = evolve_resonant(
        w0, 2.0 * times[-1],
        ResonantStepperConfig(dt=cfg.grid.dt, table=small_table, dealias=p["dealias"], nonlinearity=p["nonlinearity"]),
        stride=_stride_for(p["sample_interval"], cfg.grid.dt), max_steps=max_steps,
    )
    gaps = [resonant_scattering_extract(run.trajectory, t, 2.0 * t)[1] for t in times]
    tail_w = [w_norm_estimate(run.trajectory, (t, 2.0 * t)) for t in times]
    tail_z = [resonant_z_partial(run.trajectory, 2.0 * t) for t in times]
    result.files.append(write_rows(
        out_dir / "scattering.csv", ["t1", "t2", "cauchy_gap", "w_norm", "z_partial"],
        [{"t1": t, "t2": 2.0 * t, "cauchy_gap": g, "w_norm": w, "z_partial": z}
         for t, g, w, z in zip(times, gaps, tail_w, tail_z)],
    ))

    result.assertions += [
        ratio_in_range("e_ls_drift_order", drifts["dt"]["e_ls"], drifts["half_dt"]["e_ls"],
                       p["drift_ratio_range"], p["drift_floor"]),
        ratio_in_range("h1L2_drift_order", drifts["dt"]["h1L2"], drifts["half_dt"]["h1L2"],
                       p["drift_ratio_range"], p["drift_floor"]),
        at_most("single_component_reduction", reduction_error, p["reduction_tol"]),
        at_most("single_component_leakage", leakage, p["reduction_tol"]),
        strictly_decreasing("resonant_cauchy_gap_decreasing", gaps),
        strictly_decreasing("resonant_w_norm_decreasing", tail_w),
        strictly_decreasing("resonant_z_partial_decreasing", tail_z),
    ]
    result.measurements.update({
        "drifts": drifts,
        "cauchy_gaps": gaps,
        "w_norms": tail_w,
        "z_partials": tail_z,
        "trilinear_quotient": resonant_trilinear_quotient(run.trajectory, small_table),
    })
    return result
