"""
Profile constructors (Euclidean, large-scale, scale-one), symmetry frames and
the reconstruction of waveguide fields from resonant-system states.
"""

import math
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np

from grids import GridSpec, EuclideanGridSpec, PlaneGrid, dyadic_exponent
from field_core import (
    WaveguideField,
    Representation,
    ResonantState,
    smooth_bump,
    torus_synthesis,
)
from evolution import linear_propagate, lattice_shift

# exponent of the x low-pass threshold M^(-1/100)
LOWPASS_EXPONENT = 0.01


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameElement:
    """
    One symmetry frame: e^{i phase} M_xi T_x0 e^{-i t0 Delta}, where M_xi
    multiplies by e^{i<x, xi>} and T_x0 translates by x0.

    scale is carried for the profile constructors (N >= 1 Euclidean, M < 1
    large-scale, 1 scale-one) and does not enter frame_apply.
    """
    scale: float = 1.0
    t0: float = 0.0
    x0: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    xi: Tuple[float, float] = (0.0, 0.0)
    phase: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"Frame scale must be positive, got {self.scale}")
        if len(self.x0) != 4:
            raise ValueError(f"Frame shift must be a point of R^2 x T^2, got {self.x0}")
        if len(self.xi) != 2:
            raise ValueError(f"Frame frequency must be a 2-vector, got {self.xi}")
        object.__setattr__(self, "x0", tuple(float(c) for c in self.x0))
        object.__setattr__(self, "xi", tuple(float(c) for c in self.xi))
        if self.scale < 1 and (self.x0[2] != 0 or self.x0[3] != 0):
            raise ValueError("Large-scale frames carry no torus shift")

    @property
    def is_large_scale(self) -> bool:
        return self.scale < 1


def compose_frames(outer: FrameElement, inner: FrameElement) -> FrameElement:
    """
    Frame of the operator outer o inner.

    Raises:
        ValueError: If the scales differ
    """
    if outer.scale != inner.scale:
        raise ValueError(f"Cannot compose frames of scale {outer.scale} and {inner.scale}")
    xg, xh = np.asarray(outer.x0), np.asarray(inner.x0)
    xi_g, xi_h = np.asarray(outer.xi), np.asarray(inner.xi)
    shift = xg + xh
    shift[:2] -= 2.0 * outer.t0 * xi_h
    phase = outer.phase + inner.phase + outer.t0 * float(xi_h @ xi_h) - float(xi_h @ xg[:2])
    return FrameElement(
        scale=outer.scale,
        t0=outer.t0 + inner.t0,
        x0=tuple(shift),
        xi=tuple(xi_g + xi_h),
        phase=phase,
    )


def inverse_frame(frame: FrameElement) -> FrameElement:
    """Frame g' with compose_frames(frame, g') the identity."""
    x0, xi = np.asarray(frame.x0), np.asarray(frame.xi)
    shift = -x0
    shift[:2] -= 2.0 * frame.t0 * xi
    return FrameElement(
        scale=frame.scale,
        t0=-frame.t0,
        x0=tuple(shift),
        xi=tuple(-xi),
        phase=-frame.phase - frame.t0 * float(xi @ xi) - float(xi @ x0[:2]),
    )


def frame_apply(f: WaveguideField, frame: FrameElement) -> WaveguideField:
    """
    Apply e^{i phase} M_xi T_x0 e^{-i t0 Delta} to a waveguide field.

    The translation is a spectral phase (exact for any real x0); the
    modulation is an index roll, so xi must lie on the box-dual lattice.

    Raises:
        ValueError: If xi is off the lattice or the grid is not a waveguide
    """
    if not isinstance(f.spec, GridSpec):
        raise ValueError("frame_apply needs a waveguide grid")
    m = lattice_shift(f.spec, frame.xi)
    g = linear_propagate(f, -frame.t0)
    data = g.spectral_data()
    if any(frame.x0):
        ks = f.spec.meshgrid_wavenumbers()
        data = data * np.exp(-1j * sum(k * x for k, x in zip(ks, frame.x0)))
    if m != (0, 0):
        data = np.roll(data, shift=m, axis=(0, 1))
    if frame.phase:
        data = data * np.exp(1j * frame.phase)
    return WaveguideField(f.spec, data, Representation.SPECTRAL).with_repr(f.repr)


def scale_one_profile(w: WaveguideField, frame: FrameElement) -> WaveguideField:
    """
    Scale-one profile: a waveguide generator moved by a unit-scale frame.

    Raises:
        ValueError: If the frame scale is not 1
    """
    if frame.scale != 1:
        raise ValueError(f"Scale-one profiles need a frame of scale 1, got {frame.scale}")
    return frame_apply(w, frame)


# ---------------------------------------------------------------------------
# Euclidean profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EuclideanProfileSpec:
    """Generator phi on the R^4 box and the concentration scale N >= 1."""
    phi: WaveguideField
    N: float

    def __post_init__(self):
        if not isinstance(self.phi.spec, EuclideanGridSpec):
            raise ValueError("Euclidean profiles need a generator on a Euclidean box grid")
        if not self.N >= 1:
            raise ValueError(f"Euclidean profile scale N must be >= 1, got {self.N}")


def support_radius(f: WaveguideField, rel_tol: float = 1e-10) -> float:
    """Largest |z| among samples with |f| above rel_tol * max|f|."""
    values = np.abs(f.physical_data())
    peak = values.max()
    if peak == 0:
        return 0.0
    r2 = sum(c ** 2 for c in f.spec.meshgrid_coordinates())
    return float(np.sqrt(np.max(np.where(values > rel_tol * peak, r2, 0.0))))


def sample_spectral(f: WaveguideField, axis_points: Sequence[np.ndarray]) -> np.ndarray:
    """
    Trigonometric interpolant of f on the tensor grid of axis_points.

    Points outside the fundamental box get 0, so the generator is treated as
    compactly supported rather than periodic.
    """
    spec = f.spec
    out = f.spectral_data()
    norm = 1.0 / math.sqrt(float(np.prod(spec.shape)))
    half = [length / 2.0 for length in spec.axis_lengths]
    for axis, (pts, k) in enumerate(zip(axis_points, spec.wavenumbers())):
        pts = np.asarray(pts, dtype=float)
        basis = np.exp(1j * np.outer(pts, k)) * (np.abs(pts) < half[axis])[:, None]
        out = np.moveaxis(np.tensordot(basis, out, axes=([1], [axis])), 0, axis)
    return out * norm


def _check_euclidean_support(rho: float, N: float, target: GridSpec):
    # the support of the profile must sit in the unit ball, inside the chart
    reach = rho / N
    if reach > 1.0:
        raise ValueError(f"Profile support radius {reach:.4g} exceeds the unit ball at N={N}")
    if reach >= min(target.box_side, target.torus_period) / 2.0:
        raise ValueError(f"Profile support radius {reach:.4g} wraps around the waveguide grid")


def euclidean_profile(spec: EuclideanProfileSpec, target: GridSpec) -> WaveguideField:
    """
    f_N(z) = N eta(N^(1/2) z) phi(N z) sampled on the waveguide grid.

    Args:
        spec: Generator and scale
        target: Waveguide grid (identity chart around the origin)

    Returns:
        Physical field on target

    Raises:
        ValueError: If the cut-off profile would not fit the unit ball
    """
    N = float(spec.N)
    rho = min(2.0 * math.sqrt(N), support_radius(spec.phi))
    _check_euclidean_support(rho, N, target)
    coords = target.coordinates()
    values = sample_spectral(spec.phi, [N * c for c in coords])
    r = np.sqrt(sum(c ** 2 for c in target.meshgrid_coordinates()))
    return WaveguideField(target, N * smooth_bump(math.sqrt(N) * r) * values)


def transplant_euclidean_solution(
    v: WaveguideField,
    R: float,
    N: float,
    target: GridSpec,
) -> WaveguideField:
    """
    V_{R,N}(z) = N eta(N z / R) v(N z) for an R^4 solution value v.

    Raises:
        ValueError: If the cutoff ball of radius 2R/N leaves the unit ball
    """
    if not isinstance(v.spec, EuclideanGridSpec):
        raise ValueError("transplant needs a field on a Euclidean box grid")
    if not R > 0:
        raise ValueError(f"Cutoff radius R must be positive, got {R}")
    if 2.0 * R / N > 1.0:
        raise ValueError(f"Cutoff radius 2R/N = {2.0 * R / N:.4g} leaves the unit ball")
    coords = target.coordinates()
    values = sample_spectral(v, [N * c for c in coords])
    r = np.sqrt(sum(c ** 2 for c in target.meshgrid_coordinates()))
    return WaveguideField(target, N * smooth_bump(N * r / R) * values)


# ---------------------------------------------------------------------------
# Large-scale profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LargeScaleProfileSpec:
    """Generator psi on a waveguide grid and the stretching scale 0 < M <= 1."""
    psi: WaveguideField
    M: float

    def __post_init__(self):
        if not isinstance(self.psi.spec, GridSpec):
            raise ValueError("Large-scale profiles need a generator on a waveguide grid")
        if not 0 < self.M <= 1:
            raise ValueError(f"Large-scale profile scale M must lie in (0, 1], got {self.M}")
        dyadic_exponent(self.M)


def lowpass_x(psi: WaveguideField, M: float) -> WaveguideField:
    """P^x_{<= M^(-1/100)}: smooth cutoff on the R^2 frequency only."""
    k1, k2 = psi.spec.meshgrid_wavenumbers()[:2]
    threshold = M ** (-LOWPASS_EXPONENT)
    mult = smooth_bump(np.sqrt(k1 ** 2 + k2 ** 2) / threshold)
    out = WaveguideField(psi.spec, psi.spectral_data() * mult, Representation.SPECTRAL)
    return out.with_repr(psi.repr)


def stretched_grid(spec: GridSpec, M: float) -> GridSpec:
    """Grid carrying x -> M x stretched fields: R^2 box side L / M."""
    return replace(spec, box_side=spec.box_side / M)


def large_scale_profile(spec: LargeScaleProfileSpec) -> WaveguideField:
    """
    T^ls_M psi (x, y) = M psi*(M x, y) with psi* the x low-pass of psi.

    The stretch is an index map onto a grid whose R^2 box is L / M.

    Raises:
        ValueError: If M is not a power of two in (0, 1]
    """
    filtered = lowpass_x(spec.psi, spec.M).physical()
    if spec.M == 1:
        return filtered
    return WaveguideField(stretched_grid(spec.psi.spec, spec.M), spec.M * filtered.data)


def reconstruct_from_resonant(
    v: ResonantState,
    M: float,
    t: float,
    target: GridSpec,
) -> WaveguideField:
    """
    V_M(x, y, t) = sum_q e^{-it|q|^2} e^{i<y, q>} M v_q(M x) with v = v(M^2 t).

    Args:
        v: Resonant state at time M^2 t on its plane grid
        M: Stretching scale (power of two, <= 1)
        t: Waveguide time
        target: Waveguide grid whose R^2 box is v's box divided by M

    Raises:
        ValueError: If the grids do not match or the truncation overflows the torus
    """
    dyadic_exponent(M)
    expected = PlaneGrid(box_side=v.grid.box_side / M, nx=v.grid.nx)
    if target.plane() != expected:
        raise ValueError(
            f"Target plane grid {target.plane()} does not carry the stretched grid {expected}"
        )
    if v.trunc > target.torus_radius:
        raise ValueError(f"State truncation {v.trunc} overflows the torus radius {target.torus_radius}")
    components = {
        q: M * np.exp(-1j * t * (q[0] ** 2 + q[1] ** 2)) * comp
        for q, comp in v.components.items()
    }
    stretched = ResonantState(v.trunc, expected, components, v.torus_area)
    return torus_synthesis(stretched, target)
