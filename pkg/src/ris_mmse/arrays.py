"""Uniform planar array geometry and plane-wave array response vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

HALF_PI = np.pi / 2.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Rectangular planar array in the yz-plane.

    Elements sit on a grid with ``rows_h`` positions along y and ``cols_v``
    along z, labeled row-by-row starting at the origin.  ``spacing`` is the
    inter-element distance in wavelengths; the wavelength itself is
    normalized to 1 throughout, so spacings carry the d/lambda ratio.
    """

    rows_h: int
    cols_v: int
    spacing: float = 0.5

    def __post_init__(self) -> None:
        if self.rows_h < 1 or self.cols_v < 1:
            raise ValidationError("array needs at least one row and one column")
        if not self.spacing > 0:
            raise ValidationError("element spacing must be positive")

    @property
    def num_elements(self) -> int:
        return self.rows_h * self.cols_v


@dataclass(frozen=True)
class Angle:
    """Azimuth/elevation pair in radians, restricted to the front half-space."""

    azimuth: float
    elevation: float

    def __post_init__(self) -> None:
        if abs(self.azimuth) > HALF_PI or abs(self.elevation) > HALF_PI:
            raise ValidationError("azimuth and elevation must lie in [-pi/2, pi/2]")

    @classmethod
    def from_degrees(cls, azimuth: float, elevation: float) -> "Angle":
        return cls(float(np.deg2rad(azimuth)), float(np.deg2rad(elevation)))


def element_position(geom: ArrayGeometry, m: int) -> np.ndarray:
    """Position of the m-th element (1-based) in wavelengths.

    The x-coordinate is always 0: the array occupies the yz-plane and the
    first element sits at the origin.
    """
    if not 1 <= m <= geom.num_elements:
        raise IndexError(f"element index {m} outside [1, {geom.num_elements}]")
    row = (m - 1) % geom.rows_h
    col = (m - 1) // geom.rows_h
    return np.array([0.0, row * geom.spacing, col * geom.spacing])


def element_positions(geom: ArrayGeometry) -> np.ndarray:
    """Positions of all elements, shape (M, 3)."""
    idx = np.arange(geom.num_elements)
    pos = np.zeros((geom.num_elements, 3))
    pos[:, 1] = (idx % geom.rows_h) * geom.spacing
    pos[:, 2] = (idx // geom.rows_h) * geom.spacing
    return pos


def wave_vector(azimuth, elevation) -> np.ndarray:
    """Wave vector(s) for unit wavelength; shape (3,) for scalars, (3, ...) for grids."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    return 2.0 * np.pi * np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)]
    )


def array_response(geom: ArrayGeometry, angle: Angle) -> np.ndarray:
    """Array response vector for a plane wave from the given direction.

    Entry m equals exp(j k^T u_m); the first entry is always 1 because the
    first element sits at the origin.
    """
    k = wave_vector(angle.azimuth, angle.elevation)
    return np.exp(1j * element_positions(geom) @ k)


def response_matrix(geom: ArrayGeometry, azimuths: np.ndarray, elevations: np.ndarray) -> np.ndarray:
    """Array responses for many directions at once, shape (M, P)."""
    k = wave_vector(np.ravel(azimuths), np.ravel(elevations))
    return np.exp(1j * element_positions(geom) @ k)
