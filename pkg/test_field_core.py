"""
Grids, transforms, Littlewood-Paley projections and norms.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grids import GridSpec, PlaneGrid, dyadic_exponent, grid_from_dict, is_power_of_two
from field_core import (
    FIELD_NORM_KINDS,
    ResonantState,
    ResonantTrajectory,
    Trajectory,
    WaveguideField,
    dealias_mask,
    gradient_norm_squared,
    inner_product,
    lp_multiplier,
    lp_project,
    lp_project_low,
    norm,
    random_band_limited_field,
    resolved_shells,
    resonant_norms,
    smooth_bump,
    to_physical,
    to_spectral,
    torus_slices,
    torus_synthesis,
    w_norm_estimate,
    z_norm_estimate,
)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"box_side": 0.0, "nx": 16, "my": 3, "dt": 0.1}, "box_side"),
        ({"box_side": 8.0, "nx": 12, "my": 3, "dt": 0.1}, "nx"),
        ({"box_side": 8.0, "nx": 4, "my": 3, "dt": 0.1}, "nx"),
        ({"box_side": 8.0, "nx": 16, "my": 4, "dt": 0.1}, "my"),
        ({"box_side": 8.0, "nx": 16, "my": 3, "dt": 0.0}, "dt"),
    ],
)
def test_grid_validation_names_the_field(kwargs, field):
    with pytest.raises(ValueError, match=f"grid.{field}"):
        GridSpec(**kwargs)


def test_grid_geometry(small_grid):
    assert small_grid.shape == (16, 16, 3, 3)
    assert small_grid.torus_radius == 1
    assert small_grid.dual_spacing == pytest.approx(2.0 * math.pi / 8.0)
    assert grid_from_dict(small_grid.to_dict()) == small_grid
    coords = small_grid.coordinates()
    assert coords[0][8] == 0.0
    assert coords[0][0] == pytest.approx(-4.0)


def test_dyadic_helpers():
    assert is_power_of_two(16) and not is_power_of_two(12) and not is_power_of_two(0)
    assert dyadic_exponent(0.25) == -2
    with pytest.raises(ValueError):
        dyadic_exponent(3.0)


def test_transform_round_trip_and_unitarity(small_grid):
    f = random_band_limited_field(small_grid, 3.0, seed=1)
    g = to_physical(to_spectral(f))
    assert np.allclose(g.data, f.data, atol=1e-13)
    physical_mass = float(np.sum(np.abs(f.data) ** 2) * small_grid.cell_volume)
    assert norm(f, "mass").value == pytest.approx(physical_mass, rel=1e-12)


def test_representation_guards(small_grid):
    f = WaveguideField.zeros(small_grid)
    with pytest.raises(ValueError):
        to_physical(f)
    with pytest.raises(ValueError):
        to_spectral(f.spectral())
    with pytest.raises(ValueError):
        WaveguideField(small_grid, np.zeros((4, 4)))
    bad = np.zeros(small_grid.shape, dtype=complex)
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        WaveguideField(small_grid, bad)


def test_smooth_bump_profile():
    r = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    values = smooth_bump(r)
    assert values[:3].tolist() == [1.0, 1.0, 1.0]
    assert values[3] == pytest.approx(0.5)
    assert values[4:].tolist() == [0.0, 0.0]
    assert np.all(np.diff(smooth_bump(np.linspace(0, 3, 301))) <= 0)


def test_littlewood_paley_partition_of_unity(small_grid):
    shells = resolved_shells(small_grid)
    total = sum(lp_multiplier(small_grid, N) for N in shells)
    assert np.allclose(total, 1.0, atol=1e-14)


def test_littlewood_paley_projections_sum(small_grid):
    f = random_band_limited_field(small_grid, 6.0, seed=3)
    shells = resolved_shells(small_grid)
    pieces = sum((lp_project(f, N).data for N in shells[1:]), lp_project(f, 1).data)
    assert np.allclose(pieces, f.data, atol=1e-12)
    low = lp_project_low(f, shells[-1])
    assert np.allclose(low.data, f.data, atol=1e-12)
    with pytest.raises(ValueError):
        lp_project(f, 3)


def test_dealias_mask_leaves_torus_modes(small_grid):
    mask = dealias_mask(small_grid)
    assert mask[:, :, :, :].any()
    assert np.all(mask[0, 0, :, :])
    assert not mask[8, 0, 0, 0]


def test_norm_kinds_on_a_single_mode():
    spec = GridSpec(box_side=2.0 * math.pi, nx=8, my=3, dt=0.1)

    def plane_wave(x1, x2, y1, y2):
        return np.exp(1j * (x1 + y1))

    f = WaveguideField.from_function(spec, plane_wave)
    volume = spec.volume
    assert norm(f, "mass").value == pytest.approx(volume)
    assert norm(f, "l2").value == pytest.approx(math.sqrt(volume))
    assert norm(f, "h1").value == pytest.approx(math.sqrt(3.0 * volume))
    assert norm(f, "h01").value == pytest.approx(math.sqrt(2.0 * volume))
    assert norm(f, "h_s1_H_s2", s1=1.0, s2=1.0).value == pytest.approx(math.sqrt(4.0 * volume))
    assert norm(f, "l4").value == pytest.approx(volume ** 0.25)
    assert gradient_norm_squared(f) == pytest.approx(2.0 * volume)
    assert gradient_norm_squared(f, axes=(2, 3)) == pytest.approx(volume)
    assert inner_product(f, f).real == pytest.approx(volume)
    with pytest.raises(ValueError):
        norm(f, "h2")


def test_random_field_is_seeded_and_normalized(small_grid):
    a = random_band_limited_field(small_grid, 3.0, seed=5, amplitude=0.7)
    b = random_band_limited_field(small_grid, 3.0, seed=5, amplitude=0.7)
    assert np.array_equal(a.data, b.data)
    assert norm(a, "l2").value == pytest.approx(0.7)
    with pytest.raises(ValueError):
        random_band_limited_field(small_grid, -1.0, seed=5, amplitude=1.0)


def test_torus_slices_round_trip_and_norms(torus_grid):
    f = random_band_limited_field(torus_grid, 4.0, seed=2)
    v = torus_slices(f)
    assert v.trunc == 1
    assert np.allclose(torus_synthesis(v, torus_grid).data, f.data, atol=1e-12)
    assert resonant_norms(v, "h_s_H_k", s=0.0, k=0.0) ** 2 == pytest.approx(norm(f, "mass").value, rel=1e-12)
    assert resonant_norms(v, "h1L2") == pytest.approx(norm(f, "h01").value, rel=1e-12)
    with pytest.raises(ValueError):
        torus_slices(f, trunc=2)


def test_torus_slices_needs_two_pi_period(small_grid):
    spec = GridSpec(box_side=8.0, nx=16, my=3, dt=0.01, torus_period=3.0)
    with pytest.raises(ValueError):
        torus_slices(WaveguideField.zeros(spec))


def test_resonant_state_validation(plane_grid):
    with pytest.raises(ValueError):
        ResonantState(1, plane_grid, {(0, 0): np.zeros(plane_grid.shape, dtype=complex)})
    v = ResonantState.zeros(1, plane_grid)
    assert len(v.indices()) == 9
    assert resonant_norms(v, "E_ls") == 0.0
    with pytest.raises(ValueError):
        resonant_norms(v, "l2")


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=-1, max_value=1), st.integers(min_value=-1, max_value=1),
       st.floats(min_value=0.1, max_value=2.0))
def test_e_ls_weights_components_by_japanese_bracket(a, b, amp):
    grid = PlaneGrid(box_side=8.0, nx=8)
    v = ResonantState.zeros(1, grid)
    comps = dict(v.components)
    comps[(a, b)] = np.full(grid.shape, amp, dtype=complex)
    v = v.with_components(comps)
    expected = (1 + a * a + b * b) * amp ** 2 * grid.volume
    assert resonant_norms(v, "E_ls") == pytest.approx(expected, rel=1e-12)
    assert resonant_norms(v, "E_ls", half=True) == pytest.approx(0.5 * expected, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=10_000),
       st.floats(min_value=0.0, max_value=3.0), st.floats(min_value=-math.pi, max_value=math.pi))
def test_norm_kinds_are_homogeneous_and_subadditive(seed_f, seed_g, modulus, phase):
    spec = GridSpec(box_side=8.0, nx=8, my=3, dt=0.1)
    f = random_band_limited_field(spec, 2.0, seed_f)
    g = random_band_limited_field(spec, 2.0, seed_g)
    lam = modulus * complex(math.cos(phase), math.sin(phase))
    mass = norm(f, "mass").value
    assert norm(f.scaled(lam), "mass").value == pytest.approx(modulus ** 2 * mass, rel=1e-10, abs=1e-12)
    for kind in FIELD_NORM_KINDS:
        extra = {"s1": 0.5, "s2": 1.0} if kind == "h_s1_H_s2" else {}

        def size(h):
            value = norm(h, kind, **extra).value
            return math.sqrt(value) if kind == "mass" else value

        assert size(f.scaled(lam)) == pytest.approx(modulus * size(f), rel=1e-10, abs=1e-12)
        bound = size(f) + size(g)
        assert size(f + g) <= bound * (1 + 1e-12)


def test_trajectory_checks(small_grid):
    f = WaveguideField.zeros(small_grid)
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.1, 0.3]), [f, f, f])
    traj = Trajectory(np.array([0.0, 0.1, 0.2]), [f, f, f])
    assert traj.index_of(0.1) == 1
    with pytest.raises(ValueError):
        traj.at(0.15)
    assert z_norm_estimate(traj) == 0.0


def test_z_norm_of_constant_trajectory(small_grid):
    f = random_band_limited_field(small_grid, 3.0, seed=4)
    short = Trajectory(np.array([0.0, 0.5, 1.0]), [f, f, f])
    long = Trajectory(np.array([0.0, 0.5, 1.0, 1.5, 2.0]), [f] * 5)
    assert z_norm_estimate(long) == pytest.approx(2.0 ** 0.25 * z_norm_estimate(short), rel=1e-12)
    assert z_norm_estimate(long, (1.0, 2.0)) == pytest.approx(z_norm_estimate(short), rel=1e-12)


def test_w_norm_of_constant_single_component():
    grid = PlaneGrid(box_side=8.0, nx=8)
    v = ResonantState.zeros(1, grid)
    comps = dict(v.components)
    comps[(1, 0)] = np.full(grid.shape, 0.5, dtype=complex)
    v = v.with_components(comps)
    traj = ResonantTrajectory(np.array([0.0, 1.0, 2.0]), [v, v, v])
    expected = math.sqrt(2.0) * (0.5 ** 4 * grid.volume * 2.0) ** 0.25
    assert w_norm_estimate(traj) == pytest.approx(expected, rel=1e-12)
    assert w_norm_estimate(traj, (0.0, 1.0)) == pytest.approx(expected / 2.0 ** 0.25, rel=1e-12)
