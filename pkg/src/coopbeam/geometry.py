"""Array geometry: element layouts, bearing angles and steering vectors.

Coordinates are meters in a right-handed frame with z pointing up.
Directions are (azimuth, zenith) pairs in radians, zenith measured from
the +z axis, so zenith pi/2 is the horizon and pi points straight down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class AnglePair(NamedTuple):
    azimuth: float
    zenith: float


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Antenna element coordinates plus the phase reference point.

    Parameters
    ----------
    elements : ndarray, shape (M, 3)
        Absolute element positions.
    reference : ndarray, shape (3,)
        Point the phases are referred to. For a co-located array this is
        the array center; for a distributed array it is the hub that does
        the joint processing.
    """

    elements: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=float)
        reference = np.asarray(self.reference, dtype=float)
        if elements.ndim != 2 or elements.shape[1] != 3 or elements.shape[0] < 1:
            raise ValueError("elements must have shape (M, 3) with M >= 1")
        if reference.shape != (3,):
            raise ValueError("reference must have shape (3,)")
        if not (np.isfinite(elements).all() and np.isfinite(reference).all()):
            raise ValueError("geometry coordinates must be finite")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "reference", reference)

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def relative(self) -> np.ndarray:
        """Element coordinates relative to the phase reference, (M, 3)."""
        return self.elements - self.reference


def planar_array(rows: int, cols: int, spacing: float, center) -> ArrayGeometry:
    """Uniform rectangular array in the local x-y plane, centered on `center`.

    Element order is row-major and stable; the phase reference is the center.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if not (spacing > 0 and math.isfinite(spacing)):
        raise ValueError("spacing must be a positive finite number")
    center = np.asarray(center, dtype=float)
    if center.shape != (3,):
        raise ValueError("center must have shape (3,)")
    xs = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    ys = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    offsets = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(rows * cols)])
    return ArrayGeometry(offsets + center, center)


def angles_between(origin, target) -> AnglePair:
    """Azimuth/zenith of `target` as seen from `origin`.

    Raises ValueError for coincident points, which have no bearing.
    """
    origin = np.asarray(origin, dtype=float)
    target = np.asarray(target, dtype=float)
    d = target - origin
    horiz = math.hypot(d[0], d[1])
    if horiz == 0.0 and d[2] == 0.0:
        raise ValueError("origin and target coincide; bearing undefined")
    return AnglePair(math.atan2(d[1], d[0]), math.atan2(horiz, d[2]))


def direction_cosines(angles) -> np.ndarray:
    """Unit propagation direction (x, y, z) for an azimuth/zenith pair."""
    az, ze = float(angles[0]), float(angles[1])
    sz = math.sin(ze)
    return np.array([sz * math.cos(az), sz * math.sin(az), math.cos(ze)])


def steering_vector(geom: ArrayGeometry, angles, wavelength: float) -> np.ndarray:
    """Narrowband array response toward (azimuth, zenith).

    Entry i is exp(j 2 pi / wavelength * (r_i . u)) where r_i is element i
    relative to the phase reference and u the unit direction. All entries
    have unit modulus.
    """
    if not (wavelength > 0 and math.isfinite(wavelength)):
        raise ValueError("wavelength must be a positive finite number")
    k = 2.0 * math.pi / wavelength
    phase = geom.relative() @ direction_cosines(angles)
    return np.exp(1j * k * phase)


def steering_bank(geom: ArrayGeometry, angles, wavelength: float) -> np.ndarray:
    """Steering vectors for many directions at once, one column each.

    `angles` is an (n, 2) array of (azimuth, zenith) rows. Returns (M, n).
    """
    if not (wavelength > 0 and math.isfinite(wavelength)):
        raise ValueError("wavelength must be a positive finite number")
    ang = np.asarray(angles, dtype=float)
    if ang.ndim != 2 or ang.shape[1] != 2:
        raise ValueError("angles must have shape (n, 2)")
    az, ze = ang[:, 0], ang[:, 1]
    sz = np.sin(ze)
    u = np.stack([sz * np.cos(az), sz * np.sin(az), np.cos(ze)])  # (3, n)
    k = 2.0 * math.pi / wavelength
    return np.exp(1j * k * (geom.relative() @ u))


def steering_derivative(
    geom: ArrayGeometry, angles, wavelength: float, axis: str
) -> np.ndarray:
    """Entry-wise derivative of the steering vector along one angle axis.

    axis is "azimuth" or "zenith". Entry i is
    j 2 pi / wavelength * (r_i . du) * v_i with v the steering vector and
    du the derivative of the unit direction along the chosen axis.
    """
    az, ze = float(angles[0]), float(angles[1])
    sa, ca = math.sin(az), math.cos(az)
    sz, cz = math.sin(ze), math.cos(ze)
    if axis == "azimuth":
        du = np.array([-sz * sa, sz * ca, 0.0])
    elif axis == "zenith":
        du = np.array([cz * ca, cz * sa, -sz])
    else:
        raise ValueError(f"axis must be 'azimuth' or 'zenith', got {axis!r}")
    v = steering_vector(geom, angles, wavelength)
    k = 2.0 * math.pi / wavelength
    return 1j * k * (geom.relative() @ du) * v
