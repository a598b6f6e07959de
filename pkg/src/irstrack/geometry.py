"""Coordinate conventions and UPA steering vectors.

Directions relative to the IRS are expressed as ``(theta, phi)``: the
horizontal and vertical angles measured from the IRS normal (+x axis).
The IRS lies in the y-z plane.

Steering vectors only depend on the pair of phase factors ``(A1, A2)``
(direction cosines along the two array axes). With the azimuth/elevation
mapping used here, IRS axis 1 runs along z and axis 2 along y, so
``A1 = u_z`` and ``A2 = u_y`` for a unit vector ``u`` pointing from the IRS
towards the direction of interest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# IRS local frame: (axis 1, axis 2, normal)
IRS_AXES = (np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]))


class DegeneratePositionError(ValueError):
    """Raised when a point is not strictly in front of the IRS plane."""


class Direction(NamedTuple):
    theta: float
    phi: float


class AzEl(NamedTuple):
    azimuth: float
    elevation: float


class Position(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array with ``rows`` elements on axis 1 and ``cols`` on axis 2."""

    rows: int
    cols: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array needs at least one element per axis, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ValueError(f"element spacing must be positive, got {self.spacing}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def kd(self) -> float:
        """Phase progression per element for a unit phase factor, ``2 pi d / lambda``."""
        return 2.0 * np.pi * self.spacing / self.wavelength


def direction_from_position(p, irs_center) -> Direction:
    """Angles of point ``p`` seen from the IRS centre.

    The horizontal offset is taken relative to the IRS plane, i.e.
    ``dx = x - x_irs``.
    """
    dx, dy, dz = np.asarray(p, dtype=float) - np.asarray(irs_center, dtype=float)
    if not dx > 0:
        raise DegeneratePositionError(f"point lies behind or on the IRS plane (dx = {dx})")
    return Direction(float(np.arctan(dy / dx)), float(np.arctan(dz / dx)))


def position_from_direction(d: Direction, irs_center, distance: float) -> np.ndarray:
    """Point at ``distance`` from the IRS centre along direction ``d``."""
    u = np.array([1.0, np.tan(d.theta), np.tan(d.phi)])
    return np.asarray(irs_center, dtype=float) + distance * u / np.linalg.norm(u)


def azel_from_direction(d: Direction) -> AzEl:
    """Map ``(theta, phi)`` to the IRS azimuth/elevation pair.

    ``elevation = arctan(sqrt(tan^2 theta + tan^2 phi))`` is the angle off
    the IRS normal and ``azimuth = arctan(tan theta / tan phi) +
    pi/2 (1 - sign(tan phi))`` the in-plane angle, wrapped to ``[0, 2 pi)``.
    At ``tan phi = 0`` the limit of the arctan branch is used. Broadside maps
    to ``(0, 0)``.
    """
    tt, tp = np.tan(d.theta), np.tan(d.phi)
    if tt == 0.0 and tp == 0.0:
        return AzEl(0.0, 0.0)
    elevation = np.arctan(np.hypot(tt, tp))
    if tp != 0.0:
        # a subnormal tp overflows to inf, whose arctan is the right limit
        with np.errstate(over="ignore"):
            azimuth = np.arctan(tt / tp) + 0.5 * np.pi * (1.0 - np.sign(tp))
    else:
        azimuth = 0.5 * np.pi * np.sign(tt)
    return AzEl(float(np.mod(azimuth, 2.0 * np.pi)), float(elevation))


def phase_factors(az_el: AzEl) -> tuple[float, float]:
    """``(sin(el) cos(az), sin(el) sin(az))``."""
    s = np.sin(az_el.elevation)
    return float(s * np.cos(az_el.azimuth)), float(s * np.sin(az_el.azimuth))


def irs_phase_factors(theta, phi):
    """Vectorised ``phase_factors(azel_from_direction(.))`` for IRS directions."""
    tt, tp = np.tan(theta), np.tan(phi)
    norm = np.sqrt(1.0 + tt**2 + tp**2)
    return tp / norm, tt / norm


def direction_from_phase_factors(a1, a2):
    """Inverse of :func:`irs_phase_factors`; returns ``(theta, phi)`` arrays.

    Points outside the visible disk ``a1^2 + a2^2 < 1`` are pulled radially
    onto its edge (minus a small margin) before inversion.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    r2 = a1**2 + a2**2
    limit = 1.0 - 1e-9
    scale = np.where(r2 > limit, np.sqrt(limit / np.maximum(r2, limit)), 1.0)
    a1, a2 = a1 * scale, a2 * scale
    ux = np.sqrt(1.0 - a1**2 - a2**2)
    return np.arctan(a2 / ux), np.arctan(a1 / ux)


def local_phase_factors(u, axis1, axis2):
    """Direction cosines of unit vector(s) ``u`` along two array axes."""
    u = np.asarray(u, dtype=float)
    return u @ np.asarray(axis1, dtype=float), u @ np.asarray(axis2, dtype=float)


def element_offsets(n: int) -> np.ndarray:
    """Centred element positions ``-(n-1)/2 + (q-1)`` for ``q = 1..n``."""
    return np.arange(n) - 0.5 * (n - 1)


def axis_response(n: int, kd: float, a) -> np.ndarray:
    """Per-axis steering vector(s); broadcasts over ``a`` with elements on the last axis."""
    a = np.asarray(a, dtype=float)
    return np.exp(1j * kd * a[..., None] * element_offsets(n))


def steering_from_factors(g: ArrayGeometry, a1, a2) -> np.ndarray:
    """``a_1 (x) a_2`` for phase factors ``(a1, a2)``; broadcasts over leading axes."""
    v1 = axis_response(g.rows, g.kd, a1)
    v2 = axis_response(g.cols, g.kd, a2)
    return (v1[..., :, None] * v2[..., None, :]).reshape(*v1.shape[:-1], g.size)


def steering_vector(g: ArrayGeometry, az_el: AzEl) -> np.ndarray:
    """Steering vector of ``g`` for the azimuth/elevation pair ``az_el``."""
    a1, a2 = phase_factors(az_el)
    return steering_from_factors(g, a1, a2)


def unit_vector(src, dst) -> tuple[np.ndarray, float]:
    """Unit vector from ``src`` to ``dst`` and the distance between them."""
    v = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    dist = float(np.linalg.norm(v))
    return v / dist, dist
