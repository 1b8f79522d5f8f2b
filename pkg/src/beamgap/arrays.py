"""Uniform planar array geometry and steering vectors.

Conventions used everywhere in this package:

* The array lies in its local x-y plane. Element (m, n) of an
  ``rows x cols`` UPA sits at ``element_spacing * (m, n, 0)`` in the
  local frame, indexed row-major (flat index ``m * cols + n``).
* A direction (azimuth az, elevation el) maps to the unit vector
  ``u = (cos el * cos az, cos el * sin az, sin el)``. Elevation
  ``el = pi/2`` is array broadside (local +z); ``el = 0`` lies in the
  array plane.
* ``orientation`` is a 3x3 rotation matrix mapping local coordinates to
  world coordinates; its transpose maps world back to local.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 15e9


def wavelength(carrier_hz: float) -> float:
    return SPEED_OF_LIGHT / carrier_hz


def direction_to_unit(az: float, el: float) -> np.ndarray:
    """Unit propagation vector for (azimuth, elevation) in radians."""
    ce = np.cos(el)
    return np.array([ce * np.cos(az), ce * np.sin(az), np.sin(el)])


def unit_to_direction(u) -> tuple[float, float]:
    """Inverse of :func:`direction_to_unit`; input need not be normalized."""
    u = np.asarray(u, dtype=float)
    n = np.linalg.norm(u)
    if n == 0.0:
        raise ValueError("zero direction vector")
    u = u / n
    el = float(np.arcsin(np.clip(u[2], -1.0, 1.0)))
    az = float(np.arctan2(u[1], u[0]))
    return az, el


def rotation_about_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry of one UPA: element grid, spacing, pose, carrier.

    ``element_spacing`` defaults to half the carrier wavelength.
    ``orientation`` maps local array coordinates to world coordinates and
    must be a proper rotation; the identity means broadside-up.
    """

    rows: int
    cols: int
    element_spacing: float | None = None
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    carrier_hz: float = DEFAULT_CARRIER_HZ

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", wavelength(self.carrier_hz) / 2.0)
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be positive")
        orient = np.asarray(self.orientation, dtype=float)
        if orient.shape != (3, 3):
            raise ValueError("orientation must be a 3x3 matrix")
        if not np.allclose(orient.T @ orient, np.eye(3), atol=1e-9) or not np.isclose(
            np.linalg.det(orient), 1.0, atol=1e-9
        ):
            raise ValueError("orientation must be orthonormal with determinant +1")
        object.__setattr__(self, "orientation", orient)
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))

    @property
    def num_elements(self) -> int:
        return self.rows * self.cols

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_hz)

    def element_positions(self) -> np.ndarray:
        """Local-frame element coordinates, shape (rows*cols, 3), row-major."""
        m, n = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        pts = np.stack([m.ravel(), n.ravel(), np.zeros(self.num_elements)], axis=1)
        return self.element_spacing * pts

    def to_local(self, world_vec) -> np.ndarray:
        return self.orientation.T @ np.asarray(world_vec, dtype=float)

    def to_world(self, local_vec) -> np.ndarray:
        return self.orientation @ np.asarray(local_vec, dtype=float)

    def at(self, position, orientation=None) -> "ArrayConfig":
        """Copy of this array placed at a new pose."""
        kwargs = {"position": np.asarray(position, dtype=float)}
        if orientation is not None:
            kwargs["orientation"] = orientation
        return replace(self, **kwargs)


def steering_vector(array: ArrayConfig, direction: tuple[float, float]) -> np.ndarray:
    """Unit-norm UPA response toward a local-frame (azimuth, elevation).

    Element (m, n) carries phase (2*pi/lambda) * p(m,n) . u(direction); the
    whole vector is scaled by 1/sqrt(rows*cols) so its Euclidean norm is 1.
    """
    az, el = direction
    u = direction_to_unit(az, el)
    phases = (2.0 * np.pi / array.wavelength) * (array.element_positions() @ u)
    return np.exp(1j * phases) / np.sqrt(array.num_elements)


def steering_matrix(array: ArrayConfig, units: np.ndarray) -> np.ndarray:
    """Steering vectors for many unit direction vectors at once.

    ``units`` has shape (L, 3) in the local frame; returns (L, rows*cols).
    """
    units = np.asarray(units, dtype=float).reshape(-1, 3)
    phases = (2.0 * np.pi / array.wavelength) * (units @ array.element_positions().T)
    return np.exp(1j * phases) / np.sqrt(array.num_elements)
