"""
Shared pytest fixtures: small grids that keep every test well under a second
or two per evolution.
"""

import os
import sys
import math

import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from grids import GridSpec, EuclideanGridSpec, PlaneGrid


@pytest.fixture
def small_grid():
    return GridSpec(box_side=8.0, nx=16, my=3, dt=0.01)


@pytest.fixture
def torus_grid():
    """2*pi torus with room for lattice truncation 1."""
    return GridSpec(box_side=2.0 * math.pi, nx=16, my=3, dt=0.01)


@pytest.fixture
def plane_grid():
    return PlaneGrid(box_side=16.0, nx=32)


@pytest.fixture
def box_grid():
    return EuclideanGridSpec(box_side=8.0, n=8, dt=0.01)
