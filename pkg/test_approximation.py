"""
Approximation experiments on tiny grids.
"""

import math

import numpy as np
import pytest

from grids import GridSpec
from field_core import WaveguideField, random_band_limited_field
from evolution import ResourceGuardError
from approximation import (
    EXPERIMENT_COLUMNS,
    euclidean_approximation_experiment,
    ls_approximation_experiment,
)


@pytest.fixture
def waveguide():
    return GridSpec(box_side=2.0 * math.pi, nx=16, my=3, dt=0.01)


def test_linear_large_scale_legs_match_resonant_reconstruction(waveguide):
    psi = random_band_limited_field(waveguide, 2.0, seed=1, amplitude=0.5)
    rows = ls_approximation_experiment(
        psi, [1.0, 0.5], T0=0.02, trunc=1, nonlinearity=0, sample_interval=0.01, max_workers=1
    )
    assert [r.scale for r in rows] == [1.0, 0.5]
    assert rows[1].time_horizon == pytest.approx(0.08)
    for row in rows:
        assert row.rel_error < 1e-10
        assert row.residual_proxy == pytest.approx(0.0, abs=1e-12)
        assert list(row.to_row().keys()) == EXPERIMENT_COLUMNS


def test_large_scale_legs_are_worker_independent(waveguide):
    psi = random_band_limited_field(waveguide, 2.0, seed=2, amplitude=0.5)
    kwargs = dict(T0=0.02, trunc=1, sample_interval=0.01)
    serial = ls_approximation_experiment(psi, [1.0, 0.5], max_workers=1, **kwargs)
    threaded = ls_approximation_experiment(psi, [1.0, 0.5], max_workers=2, **kwargs)
    assert [r.sup_h1_error for r in serial] == pytest.approx([r.sup_h1_error for r in threaded], rel=1e-12)
    assert all(r.residual_proxy >= 0 for r in serial)


def test_large_scale_scales_must_decrease(waveguide):
    psi = WaveguideField.zeros(waveguide)
    with pytest.raises(ValueError, match="decreasing"):
        ls_approximation_experiment(psi, [0.5, 1.0], T0=0.02, trunc=1)
    with pytest.raises(ResourceGuardError):
        ls_approximation_experiment(psi, [0.125], T0=1.0, trunc=1, max_steps=100)


def test_euclidean_leg_row(box_grid, waveguide):
    phi = WaveguideField.from_function(box_grid, lambda *z: np.exp(-sum(c ** 2 for c in z) / 2.0))
    rows = euclidean_approximation_experiment(phi, [4.0], R=1.0, T0=0.01, target=waveguide, max_workers=1)
    assert len(rows) == 1
    row = rows[0]
    assert row.scale == 4.0
    assert row.residual_proxy is None
    assert row.to_row()["residual_proxy"] == ""
    assert math.isfinite(row.sup_h1_error) and row.sup_h1_error >= 0
    assert "h1_growth" in row.extras


def test_euclidean_experiment_guards(box_grid, waveguide):
    phi = WaveguideField.zeros(box_grid)
    with pytest.raises(ValueError, match="increasing"):
        euclidean_approximation_experiment(phi, [8.0, 4.0], R=1.0, T0=0.01, target=waveguide)
    with pytest.raises(ValueError, match="Euclidean"):
        euclidean_approximation_experiment(WaveguideField.zeros(waveguide), [4.0], R=1.0, T0=0.01, target=waveguide)
    wide = GridSpec(box_side=2.0 * math.pi, nx=64, my=3, dt=0.01)
    with pytest.raises(ResourceGuardError):
        euclidean_approximation_experiment(phi, [4.0], R=1.0, T0=0.01, target=wide)
