"""
Discretization contracts for the waveguide R^2 x T^2, the Euclidean box
standing in for R^4, and the plane grid carrying resonant-system components.
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, Any, List, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


def is_power_of_two(n: int) -> bool:
    """Return True when n is a positive integral power of two."""
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def dyadic_exponent(value: float, tol: float = 1e-12) -> int:
    """
    Return m with value == 2**m, or raise.

    Args:
        value: Positive real expected to be an integral power of two
        tol: Relative tolerance on the match

    Returns:
        Integer exponent m (may be negative)

    Raises:
        ValueError: If value is not a power of two
    """
    if not value > 0:
        raise ValueError(f"Expected a positive power of two, got {value}")
    m = int(round(math.log2(value)))
    if abs(2.0 ** m - value) > tol * value:
        raise ValueError(f"Expected a power of two, got {value}")
    return m


class _BoxGrid:
    """Shared geometry for periodic tensor-product grids."""

    shape: Tuple[int, ...]
    axis_lengths: Tuple[float, ...]

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacings(self) -> Tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.axis_lengths, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    @property
    def volume(self) -> float:
        return float(np.prod(self.axis_lengths))

    def coordinates(self) -> List[np.ndarray]:
        """
        Physical sample positions per axis.

        The origin sits at index n // 2 so that ifftshift moves it to index 0
        for both even and odd counts.
        """
        return [
            (np.arange(n) - n // 2) * h
            for n, h in zip(self.shape, self.spacings)
        ]

    def wavenumbers(self) -> List[np.ndarray]:
        """Angular wavenumbers per axis in FFT order."""
        return [
            TWO_PI * np.fft.fftfreq(n, d=length / n)
            for n, length in zip(self.shape, self.axis_lengths)
        ]

    def mode_indices(self) -> List[np.ndarray]:
        """Integer mode numbers per axis in FFT order."""
        return [np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64) for n in self.shape]

    def meshgrid_wavenumbers(self) -> List[np.ndarray]:
        return np.meshgrid(*self.wavenumbers(), indexing="ij", sparse=True)

    def meshgrid_coordinates(self) -> List[np.ndarray]:
        return np.meshgrid(*self.coordinates(), indexing="ij", sparse=True)

    def frequency_squared(self) -> np.ndarray:
        """|zeta|^2 over the full frequency grid (FFT order)."""
        total = np.zeros(self.shape)
        for k in self.meshgrid_wavenumbers():
            total = total + k ** 2
        return total

    def max_frequency(self) -> float:
        return float(np.sqrt(self.frequency_squared().max()))


@dataclass(frozen=True)
class GridSpec(_BoxGrid):
    """
    Discretization of R^2 x T^2: a periodic box [-L/2, L/2)^2 standing in for
    R^2 and exact Fourier modes on the torus of period torus_period.
    """
    box_side: float
    nx: int
    my: int
    dt: float
    torus_period: float = TWO_PI

    def __post_init__(self):
        if not self.box_side > 0:
            raise ValueError(f"grid.box_side must be positive, got {self.box_side}")
        if not is_power_of_two(self.nx) or self.nx < 8:
            raise ValueError(f"grid.nx must be a power of two >= 8, got {self.nx}")
        if not isinstance(self.my, (int, np.integer)) or self.my < 1 or self.my % 2 == 0:
            raise ValueError(f"grid.my must be an odd positive integer, got {self.my}")
        if not self.dt > 0:
            raise ValueError(f"grid.dt must be positive, got {self.dt}")
        if not self.torus_period > 0:
            raise ValueError(f"grid.torus_period must be positive, got {self.torus_period}")

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return (self.nx, self.nx, self.my, self.my)

    @property
    def axis_lengths(self) -> Tuple[float, float, float, float]:
        return (self.box_side, self.box_side, self.torus_period, self.torus_period)

    @property
    def torus_radius(self) -> int:
        """Largest resolved torus mode |k|_inf."""
        return (self.my - 1) // 2

    @property
    def dual_spacing(self) -> float:
        """Spacing 2*pi/L of the R^2 frequency lattice."""
        return TWO_PI / self.box_side

    def plane(self) -> "PlaneGrid":
        return PlaneGrid(box_side=self.box_side, nx=self.nx)

    def with_dt(self, dt: float) -> "GridSpec":
        return replace(self, dt=dt)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "waveguide",
            "box_side": self.box_side,
            "nx": self.nx,
            "my": self.my,
            "dt": self.dt,
            "torus_period": self.torus_period,
        }


@dataclass(frozen=True)
class EuclideanGridSpec(_BoxGrid):
    """Periodic box [-L/2, L/2)^4 with n points per direction, standing in for R^4."""
    box_side: float
    n: int
    dt: float

    def __post_init__(self):
        if not self.box_side > 0:
            raise ValueError(f"euclidean grid box_side must be positive, got {self.box_side}")
        if not is_power_of_two(self.n) or self.n < 8:
            raise ValueError(f"euclidean grid n must be a power of two >= 8, got {self.n}")
        if not self.dt > 0:
            raise ValueError(f"euclidean grid dt must be positive, got {self.dt}")

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return (self.n,) * 4

    @property
    def axis_lengths(self) -> Tuple[float, float, float, float]:
        return (self.box_side,) * 4

    def with_dt(self, dt: float) -> "EuclideanGridSpec":
        return replace(self, dt=dt)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "euclidean", "box_side": self.box_side, "n": self.n, "dt": self.dt}


@dataclass(frozen=True)
class PlaneGrid(_BoxGrid):
    """2-D restriction (box_side, nx) of a GridSpec; carries resonant components."""
    box_side: float
    nx: int

    def __post_init__(self):
        if not self.box_side > 0:
            raise ValueError(f"plane grid box_side must be positive, got {self.box_side}")
        if not is_power_of_two(self.nx) or self.nx < 8:
            raise ValueError(f"plane grid nx must be a power of two >= 8, got {self.nx}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.nx)

    @property
    def axis_lengths(self) -> Tuple[float, float]:
        return (self.box_side, self.box_side)

    @property
    def dual_spacing(self) -> float:
        return TWO_PI / self.box_side

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "plane", "box_side": self.box_side, "nx": self.nx}


def grid_from_dict(payload: Dict[str, Any]):
    """
    Rebuild a grid from its to_dict() form.

    Args:
        payload: Dictionary with a "kind" entry

    Returns:
        GridSpec, EuclideanGridSpec or PlaneGrid

    Raises:
        ValueError: If the kind is unknown
    """
    data = dict(payload)
    kind = data.pop("kind", "waveguide")
    if kind == "waveguide":
        return GridSpec(**data)
    if kind == "euclidean":
        return EuclideanGridSpec(**data)
    if kind == "plane":
        return PlaneGrid(**data)
    raise ValueError(f"Unknown grid kind: {kind}")
