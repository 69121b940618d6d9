"""
Approximation experiments: waveguide solutions from large-scale data against
resonant-system reconstructions, and from Euclidean data against transplanted
R^4 solutions. Errors are sup-in-time H^1 distances on sampled times.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, asdict, field
from typing import Dict, Any, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from grids import GridSpec, EuclideanGridSpec
from field_core import (
    WaveguideField,
    norm,
    torus_slices,
    trapezoid_weights,
)
from evolution import (
    NlsStepperConfig,
    ResonantStepperConfig,
    ResourceGuardError,
    evolve_nls,
    evolve_resonant,
    linear_propagate,
    resonant_rhs,
    step_count,
    MAX_STEPS,
)
from lattice_resonance import build_resonance_table
from profiles import (
    EuclideanProfileSpec,
    LargeScaleProfileSpec,
    euclidean_profile,
    large_scale_profile,
    lowpass_x,
    reconstruct_from_resonant,
    stretched_grid,
    transplant_euclidean_solution,
)

load_dotenv()

DETERMINISTIC = os.getenv("WGLAB_DETERMINISTIC", "0").lower() in ("1", "true")
DEFAULT_MAX_WORKERS = 1 if DETERMINISTIC else int(os.getenv("WGLAB_MAX_WORKERS", "2"))
VERBOSE = os.getenv("WGLAB_VERBOSE", "false").lower() == "true"

# largest points-per-axis for 4-D grids in the Euclidean experiment
GRID_CAP_4D = 32

EXPERIMENT_COLUMNS = [
    "scale",
    "time_horizon",
    "sup_h1_error",
    "rel_error",
    "residual_proxy",
    "wall_seconds",
]


@dataclass
class ApproximationRow:
    """One leg of an approximation experiment."""
    scale: float
    time_horizon: float
    sup_h1_error: float
    rel_error: float
    residual_proxy: Optional[float]
    wall_seconds: float
    extras: Dict[str, float] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        row = {k: getattr(self, k) for k in EXPERIMENT_COLUMNS}
        if row["residual_proxy"] is None:
            row["residual_proxy"] = ""
        return row

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _run_legs(scales: Sequence[float], leg, max_workers: int) -> List[ApproximationRow]:
    rows: Dict[float, ApproximationRow] = {}
    if max_workers <= 1 or len(scales) == 1:
        for s in scales:
            rows[s] = leg(s)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            future_to_scale = {executor.submit(leg, s): s for s in scales}
            for future in as_completed(future_to_scale):
                s = future_to_scale[future]
                try:
                    rows[s] = future.result()
                except Exception as e:
                    print(f"✗ Approximation leg at scale {s} failed: {e}")
                    raise
    return [rows[s] for s in scales]


# ---------------------------------------------------------------------------
# Large-scale profiles vs the resonant system
# ---------------------------------------------------------------------------

def ls_leg(
    psi: WaveguideField,
    M: float,
    T0: float,
    trunc: int,
    nonlinearity: int = 1,
    dealias: bool = True,
    sample_interval: float = 0.05,
    max_steps: int = MAX_STEPS,
) -> ApproximationRow:
    """
    One value of M: U_M from T^ls_M psi against V_M rebuilt from the resonant
    flow of the torus slices of the low-passed psi, over [0, T0 M^-2].

    The residual proxy is the L^2_t H^1 norm of the Duhamel integral of the
    non-resonant forcing |V_M|^2 V_M - (resonant part), accumulated in the
    interaction picture with trapezoid weights.
    """
    start = time.time()
    spec = psi.spec
    horizon = T0 / M ** 2
    n_steps = step_count(horizon, spec.dt, max_steps)
    dt_u = horizon / n_steps
    stride = max(1, int(sample_interval / dt_u))

    f_m = large_scale_profile(LargeScaleProfileSpec(psi, M))
    grid_m = stretched_grid(spec, M)
    v0 = torus_slices(lowpass_x(psi, M), trunc)
    table = build_resonance_table(trunc)

    v_run = evolve_resonant(
        v0, T0, ResonantStepperConfig(dt=M ** 2 * dt_u, table=table, dealias=dealias, nonlinearity=nonlinearity),
        stride=stride, max_steps=max_steps,
    )
    states = v_run.trajectory.states

    errors, u_norms, residuals, times = [], [], [], []
    accumulated = {"duhamel": None, "previous": None}

    def compare(step: int, t: float, u: WaveguideField):
        v = states[step // stride]
        V = reconstruct_from_resonant(v, M, t, grid_m)
        errors.append(norm(u - V, "h1").value)
        u_norms.append(norm(u, "h1").value)

        cubic = V.physical_data()
        cubic = np.abs(cubic) ** 2 * cubic
        resonant_part = reconstruct_from_resonant(resonant_rhs(v, table), M, t, grid_m).physical_data()
        forcing = WaveguideField(grid_m, nonlinearity * (cubic - M ** 2 * resonant_part))
        pulled = linear_propagate(forcing, -t).spectral_data()
        if accumulated["duhamel"] is None:
            accumulated["duhamel"] = np.zeros_like(pulled)
        else:
            accumulated["duhamel"] = accumulated["duhamel"] + 0.5 * (t - times[-1]) * (accumulated["previous"] + pulled)
        accumulated["previous"] = pulled
        times.append(t)
        residuals.append(norm(WaveguideField(grid_m, accumulated["duhamel"], "spectral"), "h1").value)

    compare(0, 0.0, f_m)
    evolve_nls(
        f_m, horizon, NlsStepperConfig(dt=dt_u, dealias=dealias, nonlinearity=nonlinearity),
        observers=[compare], stride=stride, keep_trajectory=False, max_steps=max_steps,
    )

    _, weights = trapezoid_weights(np.asarray(times), None)
    residual_proxy = float(np.sqrt(np.sum(weights * np.asarray(residuals) ** 2)))
    sup_error = float(max(errors))
    reference = max(u_norms)
    elapsed = time.time() - start
    if VERBOSE:
        print(f"✓ Large-scale leg M={M}: sup H1 error {sup_error:.3e} in {elapsed:.2f}s")
    return ApproximationRow(
        scale=M,
        time_horizon=horizon,
        sup_h1_error=sup_error,
        rel_error=sup_error / reference if reference else 0.0,
        residual_proxy=residual_proxy,
        wall_seconds=elapsed,
        extras={"steps": float(n_steps), "final_residual": float(residuals[-1])},
    )


def ls_approximation_experiment(
    psi: WaveguideField,
    Ms: Sequence[float],
    T0: float,
    trunc: int,
    nonlinearity: int = 1,
    dealias: bool = True,
    sample_interval: float = 0.05,
    max_steps: int = MAX_STEPS,
    max_workers: int = DEFAULT_MAX_WORKERS,
) -> List[ApproximationRow]:
    """
    Error curve over decreasing M values.

    Args:
        psi: Generator on a 2*pi waveguide grid; its dt is the U_M step
        Ms: Decreasing powers of two in (0, 1]
        T0: Horizon in resonant time (U_M runs to T0 M^-2)
        trunc: Lattice truncation for the resonant system

    Returns:
        One ApproximationRow per M in the given order

    Raises:
        ValueError: If Ms is not strictly decreasing
        ResourceGuardError: If a leg exceeds the step ceiling
    """
    if any(b >= a for a, b in zip(Ms, Ms[1:])):
        raise ValueError(f"M values must be strictly decreasing, got {list(Ms)}")
    for M in Ms:
        LargeScaleProfileSpec(psi, M)
        step_count(T0 / M ** 2, psi.spec.dt, max_steps)

    def leg(M: float) -> ApproximationRow:
        return ls_leg(psi, M, T0, trunc, nonlinearity, dealias, sample_interval, max_steps)

    return _run_legs(list(Ms), leg, max_workers)


# ---------------------------------------------------------------------------
# Euclidean profiles vs the R^4 flow
# ---------------------------------------------------------------------------

def _check_grid_cap(phi: WaveguideField, target: GridSpec):
    if phi.spec.n > GRID_CAP_4D:
        raise ResourceGuardError(f"R^4 box has n={phi.spec.n}, above the cap of {GRID_CAP_4D}")
    if max(target.nx, target.my) > GRID_CAP_4D:
        raise ResourceGuardError(
            f"Waveguide grid {target.shape} exceeds the cap of {GRID_CAP_4D} points per axis"
        )


def euclidean_leg(
    phi: WaveguideField,
    N: float,
    R: float,
    T0: float,
    target: GridSpec,
    nonlinearity: int = 1,
    dealias: bool = True,
    stride: int = 1,
    max_steps: int = MAX_STEPS,
) -> ApproximationRow:
    """
    One value of N: U_N from f_N on the waveguide against V_{R,N} built from
    the R^4 solution v' with v'(0) = phi, over [0, T0 N^-2].
    """
    start = time.time()
    horizon = T0 / N ** 2
    n_steps = step_count(horizon, target.dt, max_steps)
    dt_u = horizon / n_steps

    f_n = euclidean_profile(EuclideanProfileSpec(phi, N), target)
    u_run = evolve_nls(
        f_n, horizon, NlsStepperConfig(dt=dt_u, dealias=dealias, nonlinearity=nonlinearity),
        stride=stride, max_steps=max_steps,
    )
    v_run = evolve_nls(
        phi.physical(), T0, NlsStepperConfig(dt=N ** 2 * dt_u, dealias=dealias, nonlinearity=nonlinearity),
        stride=stride, max_steps=max_steps,
    )

    errors, u_norms = [], []
    for u, v in zip(u_run.trajectory.frames, v_run.trajectory.frames):
        V = transplant_euclidean_solution(v, R, N, target)
        errors.append(norm(u - V, "h1").value)
        u_norms.append(norm(u, "h1").value)

    sup_error = float(max(errors))
    reference = max(u_norms)
    elapsed = time.time() - start
    if VERBOSE:
        print(f"✓ Euclidean leg N={N}: sup H1 error {sup_error:.3e} in {elapsed:.2f}s")
    return ApproximationRow(
        scale=N,
        time_horizon=horizon,
        sup_h1_error=sup_error,
        rel_error=sup_error / reference if reference else 0.0,
        residual_proxy=None,
        wall_seconds=elapsed,
        extras={
            "steps": float(n_steps),
            "h1_growth": reference / u_norms[0] if u_norms[0] else 0.0,
        },
    )


def euclidean_approximation_experiment(
    phi: WaveguideField,
    Ns: Sequence[float],
    R: float,
    T0: float,
    target: GridSpec,
    nonlinearity: int = 1,
    dealias: bool = True,
    stride: int = 1,
    max_steps: int = MAX_STEPS,
    max_workers: int = DEFAULT_MAX_WORKERS,
) -> List[ApproximationRow]:
    """
    Error curve over increasing N values.

    Args:
        phi: Generator on a Euclidean box grid (n <= 32)
        Ns: Strictly increasing concentration scales
        R: Cutoff radius of the transplanted R^4 solution (2R <= N)
        T0: Horizon in R^4 time (U_N runs to T0 N^-2)
        target: Waveguide grid (nx, my <= 32); its dt is the U_N step

    Raises:
        ValueError: If Ns is not strictly increasing
        ResourceGuardError: If a grid exceeds the 4-D cap or a leg the step ceiling
    """
    if not isinstance(phi.spec, EuclideanGridSpec):
        raise ValueError("The Euclidean experiment needs a generator on a Euclidean box grid")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError(f"N values must be strictly increasing, got {list(Ns)}")
    _check_grid_cap(phi, target)
    for N in Ns:
        step_count(T0 / N ** 2, target.dt, max_steps)

    def leg(N: float) -> ApproximationRow:
        return euclidean_leg(phi, N, R, T0, target, nonlinearity, dealias, stride, max_steps)

    return _run_legs(list(Ns), leg, max_workers)
