"""
Conserved quantities, the Virial/Morawetz machinery, the windowed
Strichartz probe and scattering-profile extraction.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Callable, Dict, Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import load_dotenv

from grids import GridSpec, TWO_PI
from field_core import (
    WaveguideField,
    ResonantState,
    ResonantTrajectory,
    Trajectory,
    forward_transform,
    inverse_transform,
    spectral_derivative,
    smooth_bump,
    lp_project_low,
    lp_norm,
    norm,
    gradient_norm_squared,
    random_band_limited_field,
    resonant_norms,
    spacetime_l4_components,
    w_norm_estimate,
    z_norm_estimate,
    lattice_points,
    torus_synthesis,
)
from evolution import (
    linear_propagate,
    linear_propagate_resonant,
    galilean_boost,
    resonant_rhs,
)
from lattice_resonance import ResonanceTable

load_dotenv()

DETERMINISTIC = os.getenv("WGLAB_DETERMINISTIC", "0").lower() in ("1", "true")
DEFAULT_MAX_WORKERS = 1 if DETERMINISTIC else int(os.getenv("WGLAB_MAX_WORKERS", "2"))

# |x1 - c| <= 2R on supp chi_R and ||d_1 u||^2 <= 2E give |A_R| <= 2 sqrt(2) R (M E)^(1/2)
VIRIAL_CONSTANT = 2.0 * math.sqrt(2.0)

DIAGNOSTICS_COLUMNS = [
    "step",
    "time",
    "mass",
    "energy",
    "momentum_x1",
    "momentum_x2",
    "full_energy",
    "e_ls_if_resonant",
]


# ---------------------------------------------------------------------------
# Conserved quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConservedSet:
    mass: float
    energy: float
    momentum: Tuple[float, float]
    full_energy: float


def _momentum(f: WaveguideField) -> Tuple[float, float]:
    power = np.abs(f.spectral_data()) ** 2
    k1, k2 = f.spec.meshgrid_wavenumbers()[:2]
    cell = f.spec.cell_volume
    return (float(np.sum(k1 * power) * cell), float(np.sum(k2 * power) * cell))


def conserved_set(f: WaveguideField, nonlinearity: int = 1) -> ConservedSet:
    """
    M = ||u||^2, E = 1/2 ||grad u||^2 + 1/4 ||u||_4^4, P = Im int conj(u) grad_x u,
    L = M/2 + E.

    Args:
        f: Field in either representation
        nonlinearity: Sign of the quartic term (0 gives the linear flow energy)
    """
    mass = norm(f, "mass").value
    kinetic = 0.5 * gradient_norm_squared(f)
    potential = 0.0
    if nonlinearity:
        potential = 0.25 * nonlinearity * lp_norm(f.physical_data(), f.spec.cell_volume, 4.0) ** 4
    energy = kinetic + potential
    return ConservedSet(mass, energy, _momentum(f), 0.5 * mass + energy)


@dataclass
class DiagnosticsRecord:
    """One row of the diagnostics time series."""
    step: int
    time: float
    mass: float
    energy: float
    momentum_x1: float
    momentum_x2: float
    full_energy: float
    e_ls_if_resonant: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        row = {k: getattr(self, k) for k in DIAGNOSTICS_COLUMNS}
        if row["e_ls_if_resonant"] is None:
            row["e_ls_if_resonant"] = ""
        return row


class ConservedQuantityObserver:
    """Evolution observer producing a DiagnosticsRecord per sample."""

    def __init__(self, nonlinearity: int = 1, virial: Optional["VirialConfig"] = None):
        self.nonlinearity = nonlinearity
        self.virial = virial

    def initial(self, f: WaveguideField) -> DiagnosticsRecord:
        return self(0, 0.0, f)

    def __call__(self, step: int, t: float, f: WaveguideField) -> DiagnosticsRecord:
        c = conserved_set(f, self.nonlinearity)
        record = DiagnosticsRecord(
            step, t, c.mass, c.energy, c.momentum[0], c.momentum[1], c.full_energy
        )
        if self.virial is not None:
            record.extras["virial_action"] = virial_action(f, self.virial, t)
            record.extras["virial_bound"] = virial_bound(f, self.virial)
        return record


def resonant_hamiltonian(v: ResonantState, table: ResonanceTable, nonlinearity: int = 1) -> float:
    """
    1/2 sum_j ||grad u_j||^2 + 1/4 sum_j sum_{R(j)} int u_j1 conj(u_j2) u_j3 conj(u_j).
    """
    kinetic = 0.0
    ks = v.grid.frequency_squared()
    for comp in v.components.values():
        kinetic += float(np.sum(ks * np.abs(forward_transform(comp)) ** 2))
    kinetic *= 0.5 * v.grid.cell_volume * v.torus_area
    if not nonlinearity:
        return kinetic
    rhs = resonant_rhs(v, table)
    quartic = 0.0
    for j in v.indices():
        quartic += float(np.real(np.sum(rhs.components[j] * np.conj(v.components[j]))))
    return kinetic + 0.25 * nonlinearity * quartic * v.grid.cell_volume * v.torus_area


class ResonantObserver:
    """Observer for resonant evolutions: mass, Hamiltonian, momentum, E_ls."""

    def __init__(self, table: ResonanceTable, nonlinearity: int = 1):
        self.table = table
        self.nonlinearity = nonlinearity

    def __call__(self, step: int, t: float, v: ResonantState) -> DiagnosticsRecord:
        mass = resonant_norms(v, "h_s_H_k", s=0.0, k=0.0) ** 2
        energy = resonant_hamiltonian(v, self.table, self.nonlinearity)
        k1, k2 = v.grid.meshgrid_wavenumbers()
        p1 = p2 = 0.0
        for comp in v.components.values():
            power = np.abs(forward_transform(comp)) ** 2
            p1 += float(np.sum(k1 * power))
            p2 += float(np.sum(k2 * power))
        scale = v.grid.cell_volume * v.torus_area
        record = DiagnosticsRecord(
            step, t, mass, energy, p1 * scale, p2 * scale, 0.5 * mass + energy,
            e_ls_if_resonant=resonant_norms(v, "E_ls"),
        )
        record.extras["h1L2"] = resonant_norms(v, "h1L2")
        return record


def write_diagnostics_csv(path: Union[str, Path], records: Sequence[DiagnosticsRecord]) -> Path:
    """Write records with the fixed diagnostics columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=DIAGNOSTICS_COLUMNS)
        writer.writeheader()
        for record in records:
            writer.writerow(record.to_row())
    return path


def relative_drift(series: Sequence[float]) -> float:
    """max |q(t) - q(0)| / max(|q(0)|, tiny)."""
    values = np.asarray(series, dtype=float)
    if len(values) == 0:
        return 0.0
    reference = max(abs(values[0]), 1e-300)
    return float(np.max(np.abs(values - values[0])) / reference)


# ---------------------------------------------------------------------------
# Galilean zeroing
# ---------------------------------------------------------------------------

def zero_momentum_boost(f: WaveguideField) -> Tuple[WaveguideField, Tuple[float, float]]:
    """
    Boost by xi0 = -P/M rounded to the box-dual lattice.

    Returns:
        (boosted field, xi0); a zero field is returned unchanged with xi0 = 0
    """
    if not isinstance(f.spec, GridSpec):
        raise ValueError("zero_momentum_boost needs a waveguide grid")
    c = conserved_set(f)
    if c.mass == 0:
        return f, (0.0, 0.0)
    h = f.spec.dual_spacing
    xi0 = tuple(float(np.rint(-p / c.mass / h) * h) for p in c.momentum)
    return galilean_boost(f, xi0, 0.0), xi0


# ---------------------------------------------------------------------------
# Virial action and the momentum-density identity
# ---------------------------------------------------------------------------

@dataclass
class VirialConfig:
    """Cutoff radius R and the centre path t -> x1(t) of the Virial weight."""
    R: float
    center_path: Callable[[float], float] = lambda t: 0.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"Virial radius R must be positive, got {self.R}")


def _virial_weight(spec: GridSpec, cfg: VirialConfig, t: float) -> np.ndarray:
    center = float(cfg.center_path(t))
    if abs(center) + 2.0 * cfg.R >= spec.box_side / 2.0:
        raise ValueError(
            f"Virial cutoff |x1(t)| + 2R = {abs(center) + 2.0 * cfg.R:.4g} does not fit the half box {spec.box_side / 2.0:.4g}"
        )
    x1 = spec.meshgrid_coordinates()[0] - center
    return smooth_bump(x1 / cfg.R) * x1


def virial_action(f: WaveguideField, cfg: VirialConfig, t: float = 0.0) -> float:
    """
    A_R(t) = int chi_R(x1 - x1(t)) (x1 - x1(t)) Im[conj(u) d_1 u].

    Raises:
        ValueError: If the cutoff does not fit the box
    """
    weight = _virial_weight(f.spec, cfg, t)
    u = f.physical_data()
    du = spectral_derivative(f.spectral_data(), f.spec, 0)
    density = np.imag(np.conj(u) * du)
    return float(np.sum(weight * density) * f.spec.cell_volume)


def virial_bound(f: WaveguideField, cfg: VirialConfig) -> float:
    """c R (M E)^(1/2) with c = 2 sqrt(2)."""
    c = conserved_set(f)
    return VIRIAL_CONSTANT * cfg.R * math.sqrt(max(c.mass * c.energy, 0.0))


def _real_spectral(values: np.ndarray) -> np.ndarray:
    return forward_transform(values.astype(np.complex128))


def _derivative(values_hat: np.ndarray, ks: List[np.ndarray], axes: Sequence[int]) -> np.ndarray:
    out = values_hat
    for axis in axes:
        out = out * (1j * ks[axis])
    return out


def momentum_identity_residual(traj: Trajectory, index: int, nonlinear: bool = True) -> float:
    """
    L^2 norm of d_t Im[conj(u) d_1 u] minus
    d_1 Delta(|u|^2 / 2) - 2 div Re[conj(d_1 u) grad u] - 1/2 d_1 |u|^4,
    with the time derivative taken by central differences.

    Args:
        traj: Uniformly sampled trajectory
        index: Middle sample; index - 1 and index + 1 must exist
        nonlinear: Include the quartic term (False for linear flows)

    Raises:
        ValueError: If the neighbours are missing
    """
    if index < 1 or index + 1 >= len(traj.frames):
        raise ValueError(f"Index {index} needs neighbours inside a trajectory of {len(traj.frames)} samples")
    spec = traj.spec
    ks = spec.meshgrid_wavenumbers()
    dt = traj.times[index + 1] - traj.times[index]

    def density(f: WaveguideField) -> np.ndarray:
        return np.imag(np.conj(f.physical_data()) * spectral_derivative(f.spectral_data(), spec, 0))

    lhs = (density(traj.frames[index + 1]) - density(traj.frames[index - 1])) / (2.0 * dt)

    f = traj.frames[index]
    u = f.physical_data()
    u_hat = f.spectral_data()
    grads = [spectral_derivative(u_hat, spec, axis) for axis in range(spec.ndim)]

    half_mass_hat = _real_spectral(0.5 * np.abs(u) ** 2)
    laplacian = sum(_derivative(half_mass_hat, ks, (axis, axis)) for axis in range(spec.ndim))
    rhs_hat = _derivative(laplacian, ks, (0,))
    for axis in range(spec.ndim):
        flux = np.real(np.conj(grads[0]) * grads[axis])
        rhs_hat = rhs_hat - 2.0 * _derivative(_real_spectral(flux), ks, (axis,))
    if nonlinear:
        rhs_hat = rhs_hat - 0.5 * _derivative(_real_spectral(np.abs(u) ** 4), ks, (0,))
    rhs = np.real(inverse_transform(rhs_hat))
    return float(np.sqrt(np.sum((lhs - rhs) ** 2) * spec.cell_volume))


# ---------------------------------------------------------------------------
# Strichartz probe
# ---------------------------------------------------------------------------

def strichartz_exponent(p: float) -> float:
    """
    Scaling exponent 2 - 6/p of the frequency-localized estimate.

    Raises:
        ValueError: If p <= 10/3
    """
    if not p > 10.0 / 3.0:
        raise ValueError(f"Strichartz exponent needs p > 10/3, got {p}")
    return 2.0 - 6.0 / p


@dataclass
class StrichartzProbeConfig:
    """
    Exponents and window structure of the l^q L^p(window) norm.

    q defaults to the value fixed by 1/q + 1/p = 1/2.
    """
    p: float
    N: int
    q: Optional[float] = None
    window_count: int = 8
    samples_per_window: int = 16
    window_length: float = TWO_PI

    def __post_init__(self):
        strichartz_exponent(self.p)
        expected_q = 1.0 / (0.5 - 1.0 / self.p)
        if self.q is None:
            self.q = expected_q
        elif abs(1.0 / self.q + 1.0 / self.p - 0.5) > 1e-12:
            raise ValueError(f"Exponents must satisfy 1/q + 1/p = 1/2, got p={self.p}, q={self.q}")
        if self.window_count < 1 or self.samples_per_window < 1:
            raise ValueError("window_count and samples_per_window must be positive")


def windowed_strichartz_norm(u0: WaveguideField, cfg: StrichartzProbeConfig) -> float:
    """(sum_gamma ||e^{it Delta} u0||^q_{L^p(I_gamma x space)})^(1/q)."""
    window_norms = []
    for gamma in range(cfg.window_count):
        t0 = gamma * cfg.window_length
        times = t0 + np.linspace(0.0, cfg.window_length, cfg.samples_per_window + 1)
        values = np.array([
            lp_norm(linear_propagate(u0, t).physical_data(), u0.spec.cell_volume, cfg.p) ** cfg.p
            for t in times
        ])
        integral = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))
        window_norms.append(integral ** (1.0 / cfg.p))
    return float(np.sum(np.asarray(window_norms) ** cfg.q) ** (1.0 / cfg.q))


def strichartz_quotient(u0: WaveguideField, cfg: StrichartzProbeConfig) -> float:
    """
    ||e^{it Delta} P_{<=N} u0||_{l^q L^p} / (N^{2 - 6/p} ||u0||_{L^2}).

    Raises:
        ValueError: If u0 is zero
    """
    mass = norm(u0, "l2").value
    if mass == 0:
        raise ValueError("Strichartz quotient is undefined for zero data")
    low = lp_project_low(u0, cfg.N)
    return windowed_strichartz_norm(low, cfg) / (cfg.N ** strichartz_exponent(cfg.p) * mass)


@dataclass
class ProbeRecord:
    grid: Dict[str, Any]
    p: float
    q: float
    N: int
    seed: int
    quotient: float


@dataclass
class ProbeSummary:
    records: List[ProbeRecord]
    calibration_max: float
    max_quotient: float

    @property
    def ratio(self) -> float:
        return self.max_quotient / self.calibration_max if self.calibration_max else math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {
            "records": [asdict(r) for r in self.records],
            "calibration_max": self.calibration_max,
            "max_quotient": self.max_quotient,
            "ratio": self.ratio,
        }


def strichartz_probe(
    spec: GridSpec,
    p: float,
    shells: Sequence[int],
    seeds: Sequence[int],
    window_count: int = 8,
    samples_per_window: int = 16,
    calibration_shells: Sequence[int] = (1, 2),
    max_workers: int = DEFAULT_MAX_WORKERS,
) -> ProbeSummary:
    """
    Quotients over every (N, seed) pair for unit-mass band-limited data.

    Returns:
        ProbeSummary; calibration_max is the largest quotient over calibration_shells
    """
    band = spec.max_frequency()

    def _one(seed: int) -> List[ProbeRecord]:
        u0 = random_band_limited_field(spec, band, seed, amplitude=1.0)
        rows = []
        for N in shells:
            cfg = StrichartzProbeConfig(p=p, N=N, window_count=window_count, samples_per_window=samples_per_window)
            rows.append(ProbeRecord(spec.to_dict(), cfg.p, cfg.q, N, seed, strichartz_quotient(u0, cfg)))
        return rows

    by_seed: Dict[int, List[ProbeRecord]] = {}
    if max_workers <= 1:
        for seed in seeds:
            by_seed[seed] = _one(seed)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            future_to_seed = {executor.submit(_one, seed): seed for seed in seeds}
            for future in as_completed(future_to_seed):
                by_seed[future_to_seed[future]] = future.result()

    records = [r for seed in seeds for r in by_seed[seed]]
    calibration = [r.quotient for r in records if r.N in calibration_shells]
    return ProbeSummary(
        records,
        max(calibration) if calibration else 0.0,
        max(r.quotient for r in records),
    )


# ---------------------------------------------------------------------------
# Scattering
# ---------------------------------------------------------------------------

def _check_scattering_times(times: np.ndarray, t1: float, t2: float):
    if not (t2 > t1 > 0):
        raise ValueError(f"Scattering extraction needs t2 > t1 > 0, got t1={t1}, t2={t2}")
    if t2 > times[-1] + 1e-9 * max(1.0, t2):
        raise ValueError(f"t2={t2} is beyond the trajectory end {times[-1]}")


def scattering_extract(traj: Trajectory, t1: float, t2: float) -> Tuple[WaveguideField, float]:
    """
    Pull u(t2) back along the free flow and measure the Cauchy gap.

    Returns:
        (e^{-i t2 Delta} u(t2), ||e^{-i t1 Delta} u(t1) - e^{-i t2 Delta} u(t2)||_{H^1})

    Raises:
        ValueError: If the times are not sampled by the trajectory
    """
    _check_scattering_times(traj.times, t1, t2)
    first = linear_propagate(traj.at(t1), -t1)
    second = linear_propagate(traj.at(t2), -t2)
    return second, norm(first - second, "h1").value


def resonant_scattering_extract(traj: ResonantTrajectory, t1: float, t2: float) -> Tuple[ResonantState, float]:
    """Component-wise analogue of scattering_extract, gap measured in h^1 L^2."""
    _check_scattering_times(traj.times, t1, t2)
    first = linear_propagate_resonant(traj.at(t1), -t1)
    second = linear_propagate_resonant(traj.at(t2), -t2)
    return second, resonant_norms(first - second, "h1L2")


def z_partial(traj: Trajectory, T: float) -> float:
    """Z-norm estimate over the window [T/2, T]."""
    return z_norm_estimate(traj, (0.5 * T, T))


def resonant_z_partial(traj: ResonantTrajectory, T: float) -> float:
    """z_partial of the torus synthesis sum_j u_j(x) e^{i<y, j>} of a resonant trajectory."""
    if not traj.states:
        raise ValueError("Trajectory is empty")
    first = traj.states[0]
    dt = float(traj.times[1] - traj.times[0]) if len(traj.times) > 1 else 1.0
    spec = GridSpec(box_side=first.grid.box_side, nx=first.grid.nx, my=2 * first.trunc + 1, dt=dt)
    frames = [torus_synthesis(v, spec) for v in traj.states]
    return z_partial(Trajectory(traj.times, frames), T)


# ---------------------------------------------------------------------------
# Resonant nonlinear estimate
# ---------------------------------------------------------------------------

def resonant_trilinear_quotient(
    traj: ResonantTrajectory,
    table: ResonanceTable,
    interval: Optional[Tuple[float, float]] = None,
) -> float:
    """
    (sum_j <j>^2 [sum_{R(j)} a_j1 a_j2 a_j3]^2)^(1/2) / W^3 with a_p = ||u_p||_{L^4_{t,x}}.

    Raises:
        ValueError: If the trajectory vanishes on the window
    """
    per_component = spacetime_l4_components(traj, interval)
    w = w_norm_estimate(traj, interval)
    if w == 0:
        raise ValueError("Trilinear quotient is undefined for a vanishing trajectory")
    trunc = traj.states[0].trunc
    order = lattice_points(trunc)
    a = np.array([per_component[j] for j in order])
    total = 0.0
    for pos, i1, i2, i3 in table.coupling(trunc):
        j = order[pos]
        inner = float(np.sum(a[i1] * a[i2] * a[i3])) if len(i1) else 0.0
        total += (1 + j[0] ** 2 + j[1] ** 2) * inner ** 2
    return math.sqrt(total) / w ** 3
