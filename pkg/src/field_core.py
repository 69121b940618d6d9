"""
Field containers, spectral transforms, Littlewood-Paley projections and the
norm/functional evaluations shared by every experiment.
"""

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Dict, Any, List, Tuple, Iterable, Union

import numpy as np
import scipy.fft as sfft
from dotenv import load_dotenv

from grids import GridSpec, EuclideanGridSpec, PlaneGrid, is_power_of_two

load_dotenv()

DETERMINISTIC = os.getenv("WGLAB_DETERMINISTIC", "0").lower() in ("1", "true")

# scipy.fft worker threads; deterministic mode pins a single worker
FFT_WORKERS = 1 if DETERMINISTIC else int(os.getenv("WGLAB_FFT_WORKERS", "1"))

Grid = Union[GridSpec, EuclideanGridSpec, PlaneGrid]
LatticeIndex = Tuple[int, int]


class Representation(str, Enum):
    PHYSICAL = "physical"
    SPECTRAL = "spectral"


# ---------------------------------------------------------------------------
# Transforms on raw arrays
# ---------------------------------------------------------------------------

def forward_transform(data: np.ndarray, axes: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """Unitary DFT of physically ordered samples (origin at index n // 2)."""
    shifted = sfft.ifftshift(data, axes=axes)
    return sfft.fftn(shifted, axes=axes, norm="ortho", workers=FFT_WORKERS)


def inverse_transform(data: np.ndarray, axes: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """Inverse of forward_transform."""
    values = sfft.ifftn(data, axes=axes, norm="ortho", workers=FFT_WORKERS)
    return sfft.fftshift(values, axes=axes)


@dataclass(frozen=True, eq=False)
class WaveguideField:
    """Complex field sampled on a grid, tagged with its representation."""
    spec: Grid
    data: np.ndarray
    repr: Representation = Representation.PHYSICAL

    def __post_init__(self):
        if tuple(self.data.shape) != tuple(self.spec.shape):
            raise ValueError(
                f"Field data shape {self.data.shape} does not match grid shape {self.spec.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("Field data contains NaN or Inf entries")
        object.__setattr__(self, "repr", Representation(self.repr))

    @classmethod
    def zeros(cls, spec: Grid) -> "WaveguideField":
        return cls(spec, np.zeros(spec.shape, dtype=np.complex128))

    @classmethod
    def from_function(cls, spec: Grid, func) -> "WaveguideField":
        """Sample func(*coordinates) on the grid (coordinates broadcast)."""
        values = func(*spec.meshgrid_coordinates())
        return cls(spec, np.broadcast_to(np.asarray(values, dtype=np.complex128), spec.shape).copy())

    def with_data(self, data: np.ndarray, repr: Optional[Representation] = None) -> "WaveguideField":
        return WaveguideField(self.spec, data, self.repr if repr is None else repr)

    def physical(self) -> "WaveguideField":
        return self if self.repr == Representation.PHYSICAL else to_physical(self)

    def spectral(self) -> "WaveguideField":
        return self if self.repr == Representation.SPECTRAL else to_spectral(self)

    def physical_data(self) -> np.ndarray:
        return self.physical().data

    def spectral_data(self) -> np.ndarray:
        return self.spectral().data

    def scaled(self, factor: complex) -> "WaveguideField":
        return self.with_data(self.data * factor)

    def __add__(self, other: "WaveguideField") -> "WaveguideField":
        _check_same_grid(self, other)
        return self.with_data(self.data + other.with_repr(self.repr).data)

    def __sub__(self, other: "WaveguideField") -> "WaveguideField":
        _check_same_grid(self, other)
        return self.with_data(self.data - other.with_repr(self.repr).data)

    def with_repr(self, repr: Representation) -> "WaveguideField":
        return self.physical() if Representation(repr) == Representation.PHYSICAL else self.spectral()

    def conj(self) -> "WaveguideField":
        return self.with_data(np.conj(self.physical_data()), Representation.PHYSICAL)


def _check_same_grid(a: WaveguideField, b: WaveguideField):
    if a.spec != b.spec:
        raise ValueError("Fields live on different grids")


def to_spectral(f: WaveguideField) -> WaveguideField:
    """
    Transform a physical field to its spectral representation.

    Raises:
        ValueError: If the field is already spectral
    """
    if f.repr != Representation.PHYSICAL:
        raise ValueError("to_spectral expects a physical field")
    return WaveguideField(f.spec, forward_transform(f.data), Representation.SPECTRAL)


def to_physical(f: WaveguideField) -> WaveguideField:
    """
    Transform a spectral field back to physical samples.

    Raises:
        ValueError: If the field is already physical
    """
    if f.repr != Representation.SPECTRAL:
        raise ValueError("to_physical expects a spectral field")
    return WaveguideField(f.spec, inverse_transform(f.data), Representation.PHYSICAL)


def apply_multiplier(f: WaveguideField, multiplier: np.ndarray) -> WaveguideField:
    """Apply a Fourier multiplier; returns a field in f's representation."""
    out = WaveguideField(f.spec, f.spectral_data() * multiplier, Representation.SPECTRAL)
    return out.with_repr(f.repr)


def spectral_derivative(data_hat: np.ndarray, spec: Grid, axis: int) -> np.ndarray:
    """Physical samples of d/dz_axis given spectral coefficients."""
    k = spec.meshgrid_wavenumbers()[axis]
    return inverse_transform(1j * k * data_hat)


def dealias_mask(spec: Grid) -> np.ndarray:
    """
    2/3-rule mask on the directions approximating Euclidean space.

    Torus directions of a waveguide grid carry exact modes and are left alone.
    """
    modes = spec.mode_indices()
    if isinstance(spec, GridSpec):
        truncated_axes = (0, 1)
    else:
        truncated_axes = tuple(range(spec.ndim))
    mask = np.ones(spec.shape, dtype=bool)
    grids = np.meshgrid(*modes, indexing="ij", sparse=True)
    for axis in truncated_axes:
        mask = mask & (np.abs(grids[axis]) <= spec.shape[axis] // 3)
    return mask


# ---------------------------------------------------------------------------
# Littlewood-Paley machinery
# ---------------------------------------------------------------------------

def smooth_bump(r: np.ndarray) -> np.ndarray:
    """
    Radial cutoff template: 1 on [0, 1], 0 on [2, inf), quintic smoothstep
    in between (two continuous derivatives at both seams).
    """
    r = np.abs(np.asarray(r, dtype=float))
    s = np.clip(r - 1.0, 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def _check_dyadic(N: int):
    if not is_power_of_two(int(N)) or int(N) != N:
        raise ValueError(f"Littlewood-Paley level must be a dyadic integer, got {N}")


def lp_low_multiplier(spec: Grid, N: int) -> np.ndarray:
    """Multiplier of P_{<=N} = eta(|zeta| / N)."""
    _check_dyadic(N)
    return smooth_bump(np.sqrt(spec.frequency_squared()) / N)


def lp_multiplier(spec: Grid, N: int) -> np.ndarray:
    """Multiplier of the dyadic shell P_N (P_1 = P_{<=1})."""
    _check_dyadic(N)
    low = lp_low_multiplier(spec, N)
    if N == 1:
        return low
    return low - lp_low_multiplier(spec, N // 2)


def resolved_shells(spec: Grid) -> List[int]:
    """Dyadic levels 1, 2, ..., up to the first level covering the grid's largest frequency."""
    top = spec.max_frequency()
    shells = [1]
    while shells[-1] < top:
        shells.append(shells[-1] * 2)
    return shells


def lp_project(f: WaveguideField, N: int) -> WaveguideField:
    """
    Smooth dyadic projection P_N on the full frequency (xi, k).

    Args:
        f: Field in either representation
        N: Dyadic level 1, 2, 4, ...

    Returns:
        Projected field in f's representation
    """
    return apply_multiplier(f, lp_multiplier(f.spec, N))


def lp_project_low(f: WaveguideField, N: int) -> WaveguideField:
    """Cumulative projection P_{<=N} = sum of shells up to N."""
    return apply_multiplier(f, lp_low_multiplier(f.spec, N))


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

FIELD_NORM_KINDS = ("mass", "l2", "h1", "h01", "h_s1_H_s2", "l4")


@dataclass(frozen=True)
class NormReport:
    """A single evaluated norm or functional."""
    name: str
    value: float
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"Norm value must be nonnegative, got {self.value}")


def _weighted_spectral_sum(f: WaveguideField, weight: Optional[np.ndarray] = None) -> float:
    power = np.abs(f.spectral_data()) ** 2
    if weight is not None:
        power = power * weight
    return float(np.sum(power) * f.spec.cell_volume)


def _torus_weight(spec: GridSpec, s2: float) -> np.ndarray:
    k1, k2 = spec.meshgrid_wavenumbers()[2:]
    return (1.0 + k1 ** 2 + k2 ** 2) ** s2


def _plane_weight(spec: GridSpec, s1: float) -> np.ndarray:
    x1, x2 = spec.meshgrid_wavenumbers()[:2]
    return (1.0 + x1 ** 2 + x2 ** 2) ** s1


def lp_norm(data: np.ndarray, cell_volume: float, p: float) -> float:
    """(cell * sum |u|^p)^(1/p) on physical samples."""
    return float((np.sum(np.abs(data) ** p) * cell_volume) ** (1.0 / p))


def norm(f: WaveguideField, kind: str, s1: float = 0.0, s2: float = 0.0) -> NormReport:
    """
    Evaluate a norm or conserved functional of a field.

    Args:
        f: Field in either representation
        kind: One of mass, l2, h1, h01, h_s1_H_s2, l4
        s1: Euclidean Sobolev exponent for h_s1_H_s2
        s2: Torus Sobolev exponent for h_s1_H_s2

    Returns:
        NormReport (mass is M(u) = ||u||^2, every other kind is a norm)

    Raises:
        ValueError: If the kind is unknown or needs a waveguide grid
    """
    if kind == "mass":
        return NormReport("mass", _weighted_spectral_sum(f))
    if kind == "l2":
        return NormReport("l2", np.sqrt(_weighted_spectral_sum(f)))
    if kind == "h1":
        weight = 1.0 + f.spec.frequency_squared()
        return NormReport("h1", np.sqrt(_weighted_spectral_sum(f, weight)))
    if kind == "l4":
        return NormReport("l4", lp_norm(f.physical_data(), f.spec.cell_volume, 4.0))
    if kind in ("h01", "h_s1_H_s2"):
        if not isinstance(f.spec, GridSpec):
            raise ValueError(f"Norm kind {kind} needs a waveguide grid")
        if kind == "h01":
            weight = _torus_weight(f.spec, 1.0)
            return NormReport("h01", np.sqrt(_weighted_spectral_sum(f, weight)))
        weight = _plane_weight(f.spec, s1) * _torus_weight(f.spec, s2)
        return NormReport(
            "h_s1_H_s2",
            np.sqrt(_weighted_spectral_sum(f, weight)),
            {"s1": s1, "s2": s2},
        )
    raise ValueError(f"Unknown norm kind: {kind}")


def gradient_norm_squared(f: WaveguideField, axes: Optional[Iterable[int]] = None) -> float:
    """||grad u||^2 restricted to the given axes (all axes by default)."""
    ks = f.spec.meshgrid_wavenumbers()
    chosen = range(f.spec.ndim) if axes is None else axes
    weight = np.zeros(f.spec.shape)
    for axis in chosen:
        weight = weight + ks[axis] ** 2
    return _weighted_spectral_sum(f, weight)


def inner_product(f: WaveguideField, g: WaveguideField) -> complex:
    """<f, g>_{L^2} = integral of f * conj(g)."""
    _check_same_grid(f, g)
    return complex(np.vdot(g.spectral_data(), f.spectral_data()) * f.spec.cell_volume)


def random_band_limited_field(
    spec: Grid,
    band: float,
    seed: int,
    amplitude: Optional[float] = None,
) -> WaveguideField:
    """
    Seeded random field with spectral support in |zeta| <= band.

    Args:
        spec: Target grid
        band: Frequency radius of the support
        seed: numpy Generator seed
        amplitude: If given, rescale to this L^2 norm

    Returns:
        Physical field
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    coeffs = coeffs * (np.sqrt(spec.frequency_squared()) <= band)
    f = WaveguideField(spec, coeffs, Representation.SPECTRAL).physical()
    if amplitude is not None:
        current = norm(f, "l2").value
        if current == 0:
            raise ValueError(f"Band {band} resolves no modes on this grid")
        f = f.scaled(amplitude / current)
    return f


# ---------------------------------------------------------------------------
# Trajectories and space-time norms
# ---------------------------------------------------------------------------

def _check_uniform_times(times: np.ndarray):
    if len(times) < 1:
        raise ValueError("Trajectory is empty")
    if len(times) > 2:
        steps = np.diff(times)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
            raise ValueError("Trajectory must be uniformly sampled in time")


def trapezoid_weights(times: np.ndarray, interval: Optional[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of samples inside the interval and their trapezoid weights."""
    if interval is None:
        interval = (times[0], times[-1])
    t0, t1 = interval
    slack = 1e-9 * max(1.0, abs(t1 - t0))
    idx = np.nonzero((times >= t0 - slack) & (times <= t1 + slack))[0]
    if len(idx) == 0:
        raise ValueError(f"No trajectory samples inside interval {interval}")
    if len(idx) == 1:
        return idx, np.array([max(t1 - t0, 0.0)])
    step = times[idx[1]] - times[idx[0]]
    weights = np.full(len(idx), step)
    weights[0] = weights[-1] = step / 2.0
    return idx, weights


@dataclass
class Trajectory:
    """Uniformly time-sampled sequence of fields."""
    times: np.ndarray
    frames: List[WaveguideField]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.frames):
            raise ValueError("Trajectory times and frames differ in length")
        _check_uniform_times(self.times)

    @property
    def spec(self) -> Grid:
        return self.frames[0].spec

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """
        Index of the sample at time t.

        Raises:
            ValueError: If no sample matches
        """
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"Time {t} is outside the trajectory samples")
        return idx

    def at(self, t: float) -> WaveguideField:
        return self.frames[self.index_of(t)]


def z_norm_estimate(traj: Trajectory, interval: Optional[Tuple[float, float]] = None) -> float:
    """
    Nyquist-truncated Z-norm (sum_N N^2 ||P_N u||_{L^4_{t,x}}^4)^(1/4).

    Args:
        traj: Uniformly sampled trajectory
        interval: (t0, t1) time window; whole trajectory by default

    Returns:
        Lower bound of the continuum Z-norm on the window
    """
    if not traj.frames:
        raise ValueError("Trajectory is empty")
    idx, weights = trapezoid_weights(traj.times, interval)
    spec = traj.spec
    shells = resolved_shells(spec)
    multipliers = {N: lp_multiplier(spec, N) for N in shells}
    total = 0.0
    for i, w in zip(idx, weights):
        u_hat = traj.frames[i].spectral_data()
        for N, mult in multipliers.items():
            piece = inverse_transform(u_hat * mult)
            total += N ** 2 * w * float(np.sum(np.abs(piece) ** 4) * spec.cell_volume)
    return total ** 0.25


# ---------------------------------------------------------------------------
# Resonant-system state
# ---------------------------------------------------------------------------

def lattice_points(trunc: int) -> List[LatticeIndex]:
    """All j in Z^2 with |j|_inf <= trunc in lexicographic order."""
    return [(a, b) for a in range(-trunc, trunc + 1) for b in range(-trunc, trunc + 1)]


@dataclass(frozen=True, eq=False)
class ResonantState:
    """
    Family {u_j} of complex 2-D fields indexed by |j|_inf <= trunc.

    torus_area is the measure of the torus factor applied when norms are
    reported (1 for hand-built states, |T^2| for states sliced from a field).
    """
    trunc: int
    grid: PlaneGrid
    components: Dict[LatticeIndex, np.ndarray]
    torus_area: float = 1.0

    def __post_init__(self):
        if self.trunc < 0:
            raise ValueError(f"trunc must be nonnegative, got {self.trunc}")
        expected = set(lattice_points(self.trunc))
        if set(self.components) != expected:
            raise ValueError(
                f"ResonantState needs exactly {(2 * self.trunc + 1) ** 2} components for trunc={self.trunc}"
            )
        for j, comp in self.components.items():
            if tuple(comp.shape) != self.grid.shape:
                raise ValueError(f"Component {j} has shape {comp.shape}, expected {self.grid.shape}")
            if not np.all(np.isfinite(comp)):
                raise ValueError(f"Component {j} contains NaN or Inf entries")

    @classmethod
    def zeros(cls, trunc: int, grid: PlaneGrid, torus_area: float = 1.0) -> "ResonantState":
        return cls(
            trunc,
            grid,
            {j: np.zeros(grid.shape, dtype=np.complex128) for j in lattice_points(trunc)},
            torus_area,
        )

    def indices(self) -> List[LatticeIndex]:
        return lattice_points(self.trunc)

    def with_components(self, components: Dict[LatticeIndex, np.ndarray]) -> "ResonantState":
        return ResonantState(self.trunc, self.grid, components, self.torus_area)

    def map(self, func) -> "ResonantState":
        return self.with_components({j: func(c) for j, c in self.components.items()})

    def scaled(self, factor: complex) -> "ResonantState":
        return self.map(lambda c: c * factor)

    def conj(self) -> "ResonantState":
        return self.map(np.conj)

    def __sub__(self, other: "ResonantState") -> "ResonantState":
        if other.trunc != self.trunc or other.grid != self.grid:
            raise ValueError("ResonantStates differ in truncation or grid")
        return self.with_components({j: c - other.components[j] for j, c in self.components.items()})


def _japanese_squared(j: LatticeIndex) -> int:
    return 1 + j[0] * j[0] + j[1] * j[1]


def _plane_sobolev_squared(comp: np.ndarray, grid: PlaneGrid, k: float) -> float:
    comp_hat = forward_transform(comp)
    weight = (1.0 + grid.frequency_squared()) ** k
    return float(np.sum(weight * np.abs(comp_hat) ** 2) * grid.cell_volume)


RESONANT_NORM_KINDS = ("h1L2", "h_s_H_k", "E_ls")


def resonant_norms(
    v: ResonantState,
    kind: str,
    s: float = 1.0,
    k: float = 0.0,
    half: bool = False,
) -> float:
    """
    Discrete h^s H^k norms and the resonant energy.

    Args:
        v: Resonant state
        kind: h1L2, h_s_H_k or E_ls
        s: Lattice weight exponent for h_s_H_k
        k: Sobolev exponent in x for h_s_H_k
        half: Use the factor-1/2 convention for E_ls

    Returns:
        Norm value (E_ls is the squared quantity sum <p>^2 ||v_p||^2)

    Raises:
        ValueError: If the kind is unknown
    """
    if kind not in RESONANT_NORM_KINDS:
        raise ValueError(f"Unknown resonant norm kind: {kind}")
    if kind == "h_s_H_k":
        exponent_s, exponent_k = s, k
    else:
        exponent_s, exponent_k = 1.0, 0.0
    total = 0.0
    for j in v.indices():
        total += _japanese_squared(j) ** exponent_s * _plane_sobolev_squared(
            v.components[j], v.grid, exponent_k
        )
    total *= v.torus_area
    if kind == "E_ls":
        return 0.5 * total if half else total
    return float(np.sqrt(total))


@dataclass
class ResonantTrajectory:
    """Uniformly time-sampled sequence of resonant states."""
    times: np.ndarray
    states: List[ResonantState]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("Trajectory times and states differ in length")
        _check_uniform_times(self.times)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"Time {t} is outside the trajectory samples")
        return idx

    def at(self, t: float) -> ResonantState:
        return self.states[self.index_of(t)]


def spacetime_l4_components(
    traj: ResonantTrajectory,
    interval: Optional[Tuple[float, float]] = None,
) -> Dict[LatticeIndex, float]:
    """||u_j||_{L^4_{t,x}} over the window for every component."""
    if not traj.states:
        raise ValueError("Trajectory is empty")
    idx, weights = trapezoid_weights(traj.times, interval)
    first = traj.states[0]
    out = {}
    for j in first.indices():
        acc = 0.0
        for i, w in zip(idx, weights):
            acc += w * float(np.sum(np.abs(traj.states[i].components[j]) ** 4))
        out[j] = (acc * first.grid.cell_volume * first.torus_area) ** 0.25
    return out


def w_norm_estimate(traj: ResonantTrajectory, interval: Optional[Tuple[float, float]] = None) -> float:
    """(sum_j <j>^2 ||u_j||^2_{L^4_{t,x}})^(1/2) over the window."""
    per_component = spacetime_l4_components(traj, interval)
    total = sum(_japanese_squared(j) * value ** 2 for j, value in per_component.items())
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# Torus-mode slicing (H^{0,1} <-> h^1 L^2)
# ---------------------------------------------------------------------------

def torus_slices(f: WaveguideField, trunc: Optional[int] = None) -> ResonantState:
    """
    Fourier coefficients u_j(x) of f in the torus variable.

    Args:
        f: Field on a waveguide grid with torus period 2*pi
        trunc: Lattice radius to keep (defaults to every resolved mode)

    Returns:
        ResonantState with torus_area = |T^2| so norms match the field's

    Raises:
        ValueError: If the grid is not a 2*pi waveguide or trunc is too large
    """
    spec = f.spec
    if not isinstance(spec, GridSpec) or abs(spec.torus_period - 2.0 * np.pi) > 1e-12:
        raise ValueError("torus_slices needs a waveguide grid with torus period 2*pi")
    trunc = spec.torus_radius if trunc is None else trunc
    if trunc > spec.torus_radius:
        raise ValueError(f"trunc {trunc} exceeds the resolved torus radius {spec.torus_radius}")
    coeffs = sfft.fftn(
        sfft.ifftshift(f.physical_data(), axes=(2, 3)),
        axes=(2, 3),
        norm="forward",
        workers=FFT_WORKERS,
    )
    components = {
        (a, b): np.ascontiguousarray(coeffs[:, :, a % spec.my, b % spec.my])
        for a, b in lattice_points(trunc)
    }
    return ResonantState(trunc, spec.plane(), components, torus_area=spec.torus_period ** 2)


def torus_synthesis(v: ResonantState, spec: GridSpec) -> WaveguideField:
    """
    Assemble sum_j u_j(x) e^{i<y, j>} on a waveguide grid.

    Raises:
        ValueError: If the state does not fit the grid
    """
    if v.trunc > spec.torus_radius:
        raise ValueError(f"State truncation {v.trunc} overflows the torus radius {spec.torus_radius}")
    if v.grid != spec.plane():
        raise ValueError("State plane grid does not match the waveguide grid")
    coeffs = np.zeros(spec.shape, dtype=np.complex128)
    for (a, b), comp in v.components.items():
        coeffs[:, :, a % spec.my, b % spec.my] = comp
    data = sfft.fftshift(
        sfft.ifftn(coeffs, axes=(2, 3), norm="forward", workers=FFT_WORKERS),
        axes=(2, 3),
    )
    return WaveguideField(spec, data)
