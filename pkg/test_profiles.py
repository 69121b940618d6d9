"""
Symmetry frames and the profile constructors.
"""

import math

import numpy as np
import pytest

from grids import GridSpec
from field_core import WaveguideField, norm, random_band_limited_field, torus_slices
from profiles import (
    EuclideanProfileSpec,
    FrameElement,
    LargeScaleProfileSpec,
    compose_frames,
    euclidean_profile,
    frame_apply,
    inverse_frame,
    large_scale_profile,
    lowpass_x,
    reconstruct_from_resonant,
    sample_spectral,
    scale_one_profile,
    stretched_grid,
    support_radius,
    transplant_euclidean_solution,
)


@pytest.fixture
def frame_grid():
    return GridSpec(box_side=16.0, nx=32, my=3, dt=0.01)


def _frames(spec):
    h = spec.dual_spacing
    g = FrameElement(t0=0.3, x0=(0.5, -1.0, 0.2, 1.1), xi=(h, 0.0), phase=0.4)
    k = FrameElement(t0=-0.2, x0=(1.5, 0.25, -0.7, 0.0), xi=(-h, 2 * h), phase=-1.0)
    return g, k


def test_frame_validation():
    with pytest.raises(ValueError):
        FrameElement(scale=0.0)
    with pytest.raises(ValueError):
        FrameElement(scale=0.5, x0=(0.0, 0.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        FrameElement(xi=(1.0, 0.0, 0.0))
    assert FrameElement(scale=0.5).is_large_scale
    assert not FrameElement().is_large_scale


def test_frame_apply_keeps_mass(frame_grid):
    f = random_band_limited_field(frame_grid, 2.0, seed=1)
    g, _ = _frames(frame_grid)
    assert norm(frame_apply(f, g), "mass").value == pytest.approx(norm(f, "mass").value, rel=1e-12)


def test_composition_matches_successive_application(frame_grid):
    f = random_band_limited_field(frame_grid, 2.0, seed=2)
    g, k = _frames(frame_grid)
    once = frame_apply(f, compose_frames(g, k))
    twice = frame_apply(frame_apply(f, k), g)
    assert norm(once - twice, "l2").value < 1e-10 * norm(f, "l2").value


def test_inverse_frame(frame_grid):
    f = random_band_limited_field(frame_grid, 2.0, seed=3)
    g, _ = _frames(frame_grid)
    back = frame_apply(frame_apply(f, g), inverse_frame(g))
    assert norm(back - f, "l2").value < 1e-10 * norm(f, "l2").value
    identity = compose_frames(g, inverse_frame(g))
    assert identity.t0 == pytest.approx(0.0)
    assert identity.xi == pytest.approx((0.0, 0.0))
    assert identity.x0 == pytest.approx((0.0, 0.0, 0.0, 0.0))
    assert math.remainder(identity.phase, 2 * math.pi) == pytest.approx(0.0, abs=1e-12)


def test_composition_needs_equal_scales():
    with pytest.raises(ValueError):
        compose_frames(FrameElement(scale=2.0), FrameElement(scale=1.0))


def test_frame_frequency_must_be_on_lattice(frame_grid):
    f = random_band_limited_field(frame_grid, 2.0, seed=1)
    with pytest.raises(ValueError):
        frame_apply(f, FrameElement(xi=(0.1, 0.0)))


def test_scale_one_profile(frame_grid):
    w = random_band_limited_field(frame_grid, 2.0, seed=4)
    g, _ = _frames(frame_grid)
    assert np.array_equal(scale_one_profile(w, g).data, frame_apply(w, g).data)
    with pytest.raises(ValueError):
        scale_one_profile(w, FrameElement(scale=2.0))


def test_sample_spectral_reproduces_interior_nodes(box_grid):
    f = random_band_limited_field(box_grid, 2.0, seed=5)
    values = sample_spectral(f, box_grid.coordinates())
    interior = (slice(1, None),) * 4
    assert np.allclose(values[interior], f.physical_data()[interior], atol=1e-12)
    outside = sample_spectral(f, [np.array([10.0])] * 4)
    assert outside.shape == (1, 1, 1, 1) and outside[0, 0, 0, 0] == 0


def test_support_radius(box_grid):
    assert support_radius(WaveguideField.zeros(box_grid)) == 0.0
    bump = WaveguideField.from_function(box_grid, lambda *z: np.exp(-sum(c ** 2 for c in z) / 2.0))
    assert 6.0 < support_radius(bump) < 6.8


def test_euclidean_profile_concentrates_at_origin(box_grid):
    phi = WaveguideField.from_function(box_grid, lambda *z: np.exp(-sum(c ** 2 for c in z) / 2.0))
    target = GridSpec(box_side=2.0 * math.pi, nx=16, my=3, dt=0.01)
    f = euclidean_profile(EuclideanProfileSpec(phi, 64), target)
    values = f.physical_data()
    assert values[8, 8, 1, 1] == pytest.approx(64.0)
    assert np.argmax(np.abs(values)) == np.ravel_multi_index((8, 8, 1, 1), target.shape)
    with pytest.raises(ValueError):
        euclidean_profile(EuclideanProfileSpec(phi, 2), target)


def test_euclidean_profile_spec_validation(box_grid, small_grid):
    phi = WaveguideField.zeros(box_grid)
    with pytest.raises(ValueError):
        EuclideanProfileSpec(phi, 0.5)
    with pytest.raises(ValueError):
        EuclideanProfileSpec(WaveguideField.zeros(small_grid), 4)


def test_transplant_validation(box_grid, small_grid):
    v = WaveguideField.zeros(box_grid)
    with pytest.raises(ValueError):
        transplant_euclidean_solution(v, 3.0, 4, small_grid)
    with pytest.raises(ValueError):
        transplant_euclidean_solution(v, 0.0, 4, small_grid)
    with pytest.raises(ValueError):
        transplant_euclidean_solution(WaveguideField.zeros(small_grid), 1.0, 4, small_grid)
    out = transplant_euclidean_solution(v, 1.0, 4, small_grid)
    assert out.spec == small_grid and not np.any(out.data)


def test_large_scale_profile_spec_validation(torus_grid):
    psi = WaveguideField.zeros(torus_grid)
    with pytest.raises(ValueError):
        LargeScaleProfileSpec(psi, 0.3)
    with pytest.raises(ValueError):
        LargeScaleProfileSpec(psi, 2.0)


def test_large_scale_profile_keeps_mass_and_stretches_grid(torus_grid):
    psi = random_band_limited_field(torus_grid, 3.0, seed=6)
    f = large_scale_profile(LargeScaleProfileSpec(psi, 0.25))
    assert f.spec == stretched_grid(torus_grid, 0.25)
    assert f.spec.box_side == pytest.approx(4.0 * torus_grid.box_side)
    assert norm(f, "mass").value == pytest.approx(norm(lowpass_x(psi, 0.25), "mass").value, rel=1e-12)


def test_reconstruction_at_time_zero_is_the_profile(torus_grid):
    psi = random_band_limited_field(torus_grid, 3.0, seed=7)
    M = 0.5
    v = torus_slices(lowpass_x(psi, M))
    target = stretched_grid(torus_grid, M)
    V = reconstruct_from_resonant(v, M, 0.0, target)
    expected = large_scale_profile(LargeScaleProfileSpec(psi, M))
    assert np.allclose(V.physical_data(), expected.physical_data(), atol=1e-12)
    with pytest.raises(ValueError):
        reconstruct_from_resonant(v, M, 0.0, torus_grid)
