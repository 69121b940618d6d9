"""
Time integration of the cubic NLS on R^2 x T^2 (and on the R^4 box) and of
the truncated cubic resonant system, plus the equation's exact symmetries.
"""

import os
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from grids import GridSpec, EuclideanGridSpec, PlaneGrid, dyadic_exponent
from field_core import (
    WaveguideField,
    Representation,
    ResonantState,
    ResonantTrajectory,
    Trajectory,
    Grid,
    forward_transform,
    inverse_transform,
    dealias_mask,
    lattice_points,
    norm,
    resonant_norms,
)
from lattice_resonance import ResonanceTable, build_resonance_table

load_dotenv()

MAX_STEPS = int(os.getenv("WGLAB_MAX_STEPS", "200000"))
VERBOSE = os.getenv("WGLAB_VERBOSE", "false").lower() == "true"

# Observer(step, time, state) -> record or None
Observer = Callable[[int, float, Any], Any]


class NumericalInstabilityError(RuntimeError):
    """A step produced NaN or Inf values."""


class ResourceGuardError(RuntimeError):
    """A requested evolution exceeds the configured step ceiling."""


@dataclass(frozen=True)
class NlsStepperConfig:
    """
    Split-step settings for (i d_t + Delta) u = rho |u|^2 u.

    nonlinearity is rho: 1 defocusing, -1 focusing, 0 linear.
    direction = -1 runs the same scheme backwards in time.
    """
    dt: float
    scheme: str = "strang_split"
    dealias: bool = True
    nonlinearity: int = 1
    direction: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme != "strang_split":
            raise ValueError(f"Unknown NLS scheme: {self.scheme}")
        if self.nonlinearity not in (-1, 0, 1):
            raise ValueError(f"nonlinearity must be -1, 0 or 1, got {self.nonlinearity}")
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")

    @property
    def signed_dt(self) -> float:
        return self.direction * self.dt

    def reversed(self) -> "NlsStepperConfig":
        return replace(self, direction=-self.direction)


@dataclass(frozen=True)
class ResonantStepperConfig:
    """Interaction-picture RK4 settings for the truncated resonant system."""
    dt: float
    table: ResonanceTable
    scheme: str = "interaction_picture_rk4"
    dealias: bool = True
    nonlinearity: int = 1
    direction: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme != "interaction_picture_rk4":
            raise ValueError(f"Unknown resonant scheme: {self.scheme}")
        if self.nonlinearity not in (-1, 0, 1):
            raise ValueError(f"nonlinearity must be -1, 0 or 1, got {self.nonlinearity}")
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")

    @classmethod
    def for_truncation(cls, dt: float, trunc: int, **kwargs) -> "ResonantStepperConfig":
        return cls(dt=dt, table=build_resonance_table(trunc), **kwargs)

    @property
    def signed_dt(self) -> float:
        return self.direction * self.dt

    def reversed(self) -> "ResonantStepperConfig":
        return replace(self, direction=-self.direction)


# ---------------------------------------------------------------------------
# Linear flow
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _propagator(spec: Grid, t: float) -> np.ndarray:
    return np.exp(-1j * t * spec.frequency_squared())


@lru_cache(maxsize=8)
def _mask(spec: Grid) -> np.ndarray:
    return dealias_mask(spec)


def linear_propagate(f: WaveguideField, t: float) -> WaveguideField:
    """
    Free evolution e^{it Delta}: every coefficient at frequency zeta is
    multiplied by e^{-it|zeta|^2}.

    Returns:
        Field in f's representation
    """
    if t == 0:
        return f
    out = WaveguideField(f.spec, f.spectral_data() * _propagator(f.spec, float(t)), Representation.SPECTRAL)
    return out.with_repr(f.repr)


def linear_propagate_resonant(v: ResonantState, t: float) -> ResonantState:
    """Component-wise free 2-D flow e^{it Delta_x}."""
    if t == 0:
        return v
    mult = _propagator(v.grid, float(t))
    return v.map(lambda c: inverse_transform(forward_transform(c) * mult))


# ---------------------------------------------------------------------------
# Cubic NLS
# ---------------------------------------------------------------------------

def _check_finite(data: np.ndarray, what: str):
    if not np.all(np.isfinite(data)):
        raise NumericalInstabilityError(f"{what} produced non-finite values")


def _strang_step(u_hat: np.ndarray, spec: Grid, cfg: NlsStepperConfig) -> np.ndarray:
    dt = cfg.signed_dt
    half = _propagator(spec, 0.5 * dt)
    u_hat = u_hat * half
    if cfg.nonlinearity:
        u = inverse_transform(u_hat)
        u = u * np.exp(-1j * cfg.nonlinearity * dt * np.abs(u) ** 2)
        u_hat = forward_transform(u)
        if cfg.dealias:
            u_hat = u_hat * _mask(spec)
    return u_hat * half


def step_nls(f: WaveguideField, cfg: NlsStepperConfig) -> WaveguideField:
    """
    One Strang step: half linear step, pointwise rotation u e^{-i dt |u|^2},
    half linear step.

    Args:
        f: Field on a waveguide or Euclidean box grid
        cfg: Stepper settings

    Returns:
        Field in f's representation

    Raises:
        NumericalInstabilityError: If the step produces NaN/Inf
    """
    u_hat = _strang_step(f.spectral_data(), f.spec, cfg)
    _check_finite(u_hat, "NLS step")
    return WaveguideField(f.spec, u_hat, Representation.SPECTRAL).with_repr(f.repr)


@dataclass
class EvolutionResult:
    """Output of a fixed-step evolution."""
    trajectory: Optional[Any]
    records: List[Any] = field(default_factory=list)
    final: Any = None
    steps: int = 0
    wall_seconds: float = 0.0


def step_count(T: float, dt: float, max_steps: int = MAX_STEPS) -> int:
    """
    Number of fixed steps covering [0, T].

    Raises:
        ValueError: If T is not positive
        ResourceGuardError: If the count exceeds max_steps
    """
    if not T > 0:
        raise ValueError(f"Evolution horizon T must be positive, got {T}")
    n = max(1, int(round(T / dt)))
    if n > max_steps:
        raise ResourceGuardError(
            f"Horizon T={T} at dt={dt} needs {n} steps, above the ceiling of {max_steps}"
        )
    return n


def _mass(state) -> float:
    if isinstance(state, ResonantState):
        return resonant_norms(state, "h_s_H_k", s=0.0, k=0.0) ** 2
    return norm(state, "mass").value


def _run_fixed_steps(state, n_steps, dt, advance, observers, stride, keep_trajectory, label):
    observers = list(observers or [])
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    start = time.time()
    times, frames, records = [0.0], [state], []
    for n in range(1, n_steps + 1):
        try:
            state = advance(state)
        except NumericalInstabilityError as e:
            raise NumericalInstabilityError(
                f"{e} at step {n} (t={n * dt:.6g}), last finite mass {_mass(state):.6g}"
            ) from e
        if n % stride == 0:
            t = n * dt
            for observer in observers:
                record = observer(n, t, state)
                if record is not None:
                    records.append(record)
            if keep_trajectory:
                times.append(t)
                frames.append(state)
    elapsed = time.time() - start
    if VERBOSE:
        print(f"✓ {label}: {n_steps} steps to t={n_steps * dt:.4g} in {elapsed:.2f}s")
    return times, frames, records, state, elapsed


def evolve_nls(
    f0: WaveguideField,
    T: float,
    cfg: NlsStepperConfig,
    observers: Optional[Sequence[Observer]] = None,
    stride: int = 1,
    keep_trajectory: bool = True,
    max_steps: int = MAX_STEPS,
) -> EvolutionResult:
    """
    Fixed-step NLS evolution over [0, T].

    Args:
        f0: Initial data
        T: Horizon (rounded to a whole number of steps)
        cfg: Stepper settings
        observers: Callables (step, t, field) -> record, run every stride steps
        stride: Observer and trajectory sampling stride
        keep_trajectory: Keep sampled fields (t = 0 included)
        max_steps: Step ceiling

    Returns:
        EvolutionResult with a Trajectory (or None) and the observer records
    """
    n_steps = step_count(T, cfg.dt, max_steps)
    spec = f0.spec

    def advance(g: WaveguideField) -> WaveguideField:
        return step_nls(g, cfg)

    times, frames, records, final, elapsed = _run_fixed_steps(
        f0.physical(), n_steps, cfg.signed_dt, advance, observers, stride, keep_trajectory,
        f"NLS evolution on {type(spec).__name__} {spec.shape}",
    )
    trajectory = Trajectory(np.abs(times), frames) if keep_trajectory else None
    return EvolutionResult(trajectory, records, final, n_steps, elapsed)


# ---------------------------------------------------------------------------
# Resonant system
# ---------------------------------------------------------------------------

def _stack(v: ResonantState) -> np.ndarray:
    return np.stack([v.components[j] for j in lattice_points(v.trunc)], axis=0)


def _unstack(v: ResonantState, stacked: np.ndarray) -> ResonantState:
    return v.with_components({j: stacked[i] for i, j in enumerate(lattice_points(v.trunc))})


def _cubic_sum(u: np.ndarray, coupling) -> np.ndarray:
    out = np.zeros_like(u)
    u_bar = np.conj(u)
    for pos, i1, i2, i3 in coupling:
        if len(i1):
            out[pos] = np.sum(u[i1] * u_bar[i2] * u[i3], axis=0)
    return out


def resonant_rhs(v: ResonantState, table: ResonanceTable) -> ResonantState:
    """
    Component j of the result is the sum over R(j) of u_j1 conj(u_j2) u_j3.

    Raises:
        ValueError: If the table radius is smaller than the state's
    """
    coupling = table.coupling(v.trunc)
    return _unstack(v, _cubic_sum(_stack(v), coupling))


def _lawson_rk4(u_hat: np.ndarray, dt: float, spec: Grid, nonlinear) -> np.ndarray:
    e_half = _propagator(spec, 0.5 * dt)
    e_full = _propagator(spec, dt)
    k1 = nonlinear(u_hat)
    k2 = nonlinear(e_half * (u_hat + 0.5 * dt * k1))
    k3 = nonlinear(e_half * u_hat + 0.5 * dt * k2)
    k4 = nonlinear(e_full * u_hat + dt * e_half * k3)
    return e_full * u_hat + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)


def _spectral_2d(u: np.ndarray) -> np.ndarray:
    return forward_transform(u, axes=(-2, -1))


def _physical_2d(u_hat: np.ndarray) -> np.ndarray:
    return inverse_transform(u_hat, axes=(-2, -1))


def step_resonant(v: ResonantState, cfg: ResonantStepperConfig) -> ResonantState:
    """
    One interaction-picture RK4 step of (i d_t + Delta_x) u_j = sum_{R(j)} u_j1 conj(u_j2) u_j3.

    The linear part is integrated exactly; RK4 acts on e^{-it Delta_x} u.

    Raises:
        ValueError: If the table radius is smaller than the state's
        NumericalInstabilityError: If the step produces NaN/Inf
    """
    coupling = cfg.table.coupling(v.trunc)
    mask = _mask(v.grid) if cfg.dealias else None

    def nonlinear(u_hat: np.ndarray) -> np.ndarray:
        if not cfg.nonlinearity:
            return np.zeros_like(u_hat)
        out = _spectral_2d(_cubic_sum(_physical_2d(u_hat), coupling))
        if mask is not None:
            out = out * mask
        return -1j * cfg.nonlinearity * out

    u_hat = _lawson_rk4(_spectral_2d(_stack(v)), cfg.signed_dt, v.grid, nonlinear)
    _check_finite(u_hat, "Resonant step")
    return _unstack(v, _physical_2d(u_hat))


def step_scalar_nls_2d(
    u: np.ndarray,
    grid: PlaneGrid,
    dt: float,
    nonlinearity: int = 1,
    dealias: bool = True,
) -> np.ndarray:
    """
    Scalar 2-D cubic NLS (i d_t + Delta) u = rho |u|^2 u advanced by the same
    interaction-picture RK4 as the resonant system.

    Args:
        u: Physical samples on the plane grid
        grid: Plane grid
        dt: Time step (sign sets direction)
        nonlinearity: rho in {-1, 0, 1}

    Returns:
        Physical samples after one step
    """
    mask = _mask(grid) if dealias else None

    def nonlinear(u_hat: np.ndarray) -> np.ndarray:
        if not nonlinearity:
            return np.zeros_like(u_hat)
        w = _physical_2d(u_hat)
        out = _spectral_2d(np.abs(w) ** 2 * w)
        if mask is not None:
            out = out * mask
        return -1j * nonlinearity * out

    u_hat = _lawson_rk4(_spectral_2d(u), dt, grid, nonlinear)
    _check_finite(u_hat, "Scalar 2-D step")
    return _physical_2d(u_hat)


def evolve_resonant(
    v0: ResonantState,
    T: float,
    cfg: ResonantStepperConfig,
    observers: Optional[Sequence[Observer]] = None,
    stride: int = 1,
    keep_trajectory: bool = True,
    max_steps: int = MAX_STEPS,
) -> EvolutionResult:
    """
    Fixed-step resonant evolution over [0, T].

    Returns:
        EvolutionResult with a ResonantTrajectory (or None)
    """
    n_steps = step_count(T, cfg.dt, max_steps)
    # build the coupling once before the loop
    cfg.table.coupling(v0.trunc)

    def advance(w: ResonantState) -> ResonantState:
        return step_resonant(w, cfg)

    times, states, records, final, elapsed = _run_fixed_steps(
        v0, n_steps, cfg.signed_dt, advance, observers, stride, keep_trajectory,
        f"Resonant evolution (trunc={v0.trunc}, nx={v0.grid.nx})",
    )
    trajectory = ResonantTrajectory(np.abs(times), states) if keep_trajectory else None
    return EvolutionResult(trajectory, records, final, n_steps, elapsed)


# ---------------------------------------------------------------------------
# Symmetries
# ---------------------------------------------------------------------------

def lattice_shift(spec: GridSpec, xi0: Sequence[float], tol: float = 1e-9) -> Tuple[int, int]:
    """
    Integer index m with xi0 = m * 2*pi/L.

    Raises:
        ValueError: If xi0 is off the box-dual lattice
    """
    if len(xi0) != 2:
        raise ValueError(f"Boost frequency must be a 2-vector, got {xi0}")
    scaled = np.asarray(xi0, dtype=float) / spec.dual_spacing
    m = np.rint(scaled)
    if np.max(np.abs(scaled - m)) > tol:
        raise ValueError(
            f"Boost frequency {tuple(xi0)} is not on the dual lattice with spacing {spec.dual_spacing:.6g}"
        )
    return int(m[0]), int(m[1])


def galilean_boost(f: WaveguideField, xi0: Sequence[float], t: float) -> WaveguideField:
    """
    v(z, t) = e^{-i|xi0|^2 t + i<x, xi0>} u(z - 2 xi0 t, t), acting on the R^2 directions.

    Args:
        f: Solution value u(., t) on a waveguide grid
        xi0: Boost frequency on the box-dual lattice
        t: Time at which f is taken

    Returns:
        Boosted field in f's representation

    Raises:
        ValueError: If xi0 is off the lattice
    """
    if not isinstance(f.spec, GridSpec):
        raise ValueError("galilean_boost needs a waveguide grid")
    m = lattice_shift(f.spec, xi0)
    if m == (0, 0):
        return f
    xi = np.asarray(xi0, dtype=float)
    k1, k2 = f.spec.meshgrid_wavenumbers()[:2]
    translated = f.spectral_data() * np.exp(-2j * t * (k1 * xi[0] + k2 * xi[1]))
    modulated = np.roll(translated, shift=m, axis=(0, 1))
    data = np.exp(-1j * t * float(xi @ xi)) * modulated
    return WaveguideField(f.spec, data, Representation.SPECTRAL).with_repr(f.repr)


def rescale_solution(f: WaveguideField, lam: float) -> Tuple[WaveguideField, Grid]:
    """
    u -> lam u(lam x, lam y, lam^2 t) as an exact index map.

    The samples keep their indices; the new grid has every length divided
    by lam and dt divided by lam^2.

    Args:
        f: Field on a waveguide or Euclidean box grid
        lam: Integral power of two

    Returns:
        (rescaled field, its grid)

    Raises:
        ValueError: If lam is not a power of two
    """
    dyadic_exponent(lam)
    spec = f.spec
    if isinstance(spec, GridSpec):
        new_spec = replace(
            spec,
            box_side=spec.box_side / lam,
            torus_period=spec.torus_period / lam,
            dt=spec.dt / lam ** 2,
        )
    elif isinstance(spec, EuclideanGridSpec):
        new_spec = replace(spec, box_side=spec.box_side / lam, dt=spec.dt / lam ** 2)
    else:
        raise ValueError(f"Cannot rescale a field on {type(spec).__name__}")
    if lam == 1:
        return f, spec
    return WaveguideField(new_spec, f.physical_data() * lam), new_spec
