"""Separable IRS phase-shift codebooks.

Every codeword is the Kronecker product of two axis vectors, and each axis
vector is a shared beam shape multiplied by a codeword-dependent linear
phase ramp. Because the steering vectors are also separable, the reflection
gain factorises into two per-axis gains, which is what the vectorised
routines below exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import (
    AzEl,
    ArrayGeometry,
    Direction,
    axis_response,
    direction_from_phase_factors,
    element_offsets,
    irs_phase_factors,
    phase_factors,
    steering_from_factors,
)

KINDS = ("linear", "quadratic", "optimized", "custom")


@dataclass(frozen=True, eq=False)
class BeamShape:
    """Per-axis phase profile ``rho``; the shape vector is ``unit_gain * exp(j rho)``."""

    phases: np.ndarray
    unit_gain: float = 1.0

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float).ravel()
        if phases.size < 1:
            raise ValueError("beam shape needs at least one element")
        object.__setattr__(self, "phases", phases)

    def __len__(self):
        return self.phases.size

    @property
    def vector(self) -> np.ndarray:
        return self.unit_gain * np.exp(1j * self.phases)


class Codeword(NamedTuple):
    m1: int
    m2: int


def linear_profile(Q: int) -> BeamShape:
    """Flat shape; the codeword ramps alone steer the beam."""
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    return BeamShape(np.zeros(Q))


def quadratic_profile(Q: int, M: int, spacing: float, wavelength: float, m: int | None = None) -> BeamShape:
    """Quadratic phase profile that widens the beam over one codeword spacing.

    ``rho_q = -(2 pi d / lambda) (dbeta q^2 / (2Q) + beta q)`` for
    ``q = 1..Q`` with ``dbeta = min(4, lambda/d) / M``. With ``m`` given,
    ``beta = m * dbeta``; by default ``beta`` is chosen so the swept range of
    phase factors is centred on the nominal beam direction.
    """
    if Q < 1 or M < 1:
        raise ValueError(f"Q and M must be >= 1, got Q={Q}, M={M}")
    if m is not None and not 0 <= m < M:
        raise IndexError(f"codeword index {m} outside 0..{M - 1}")
    kd = 2.0 * np.pi * spacing / wavelength
    dbeta = min(4.0, wavelength / spacing) / M
    beta = m * dbeta if m is not None else -dbeta * (Q + 1) / (2.0 * Q)
    q = np.arange(1, Q + 1)
    return BeamShape(-kd * (dbeta * q**2 / (2.0 * Q) + beta * q))


def nominal_factor(m, M: int, spacing: float, wavelength: float):
    """Phase factor the ramp of index ``m`` steers to: ``2m/M - lambda/(2d)``."""
    return 2.0 * np.asarray(m) / M - wavelength / (2.0 * spacing)


def steered_axis_vector(shape: BeamShape, target, spacing: float, wavelength: float) -> np.ndarray:
    """``shape (.) exp(j kd target q)`` for ``q = 1..Q``; broadcasts over ``target``."""
    kd = 2.0 * np.pi * spacing / wavelength
    q = np.arange(1, len(shape) + 1)
    target = np.asarray(target, dtype=float)
    return shape.vector * np.exp(1j * kd * target[..., None] * q)


def codeword_axis_vector(shape: BeamShape, m_axis: int, M: int, spacing: float, wavelength: float) -> np.ndarray:
    """Axis vector of index ``m_axis``: shape times the ramp ``exp(j(4 pi d m/(lambda M) - pi) q)``."""
    if not 0 <= m_axis < M:
        raise IndexError(f"codeword index {m_axis} outside 0..{M - 1}")
    q = np.arange(1, len(shape) + 1)
    step = 4.0 * np.pi * spacing * m_axis / (wavelength * M) - np.pi
    return shape.vector * np.exp(1j * step * q)


def angular_spacing(M: int) -> float:
    """Codeword spacing in phase-factor units, ``2/M``."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    return 2.0 / M


def angular_spacing_deg(M: int) -> float:
    return np.degrees(angular_spacing(M))


def _golden_max(f, lo, hi, tol=1e-6):
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - inv * (hi - lo), lo + inv * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - inv * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def shape_lobe_offset(shape: BeamShape, spacing: float, wavelength: float, grid: int = 501, tol: float = 1e-6) -> float:
    """Offset of the main lobe of ``shape`` from its nominal steering direction.

    The per-axis gain of codeword ``m`` is ``|F(a - a_m)|`` with
    ``F(x) = sum_q shape_q exp(-j kd x o_q)``, so a single search over one
    period of ``F`` gives the main lobe of every codeword.
    """
    kd = 2.0 * np.pi * spacing / wavelength
    period = wavelength / spacing
    offsets = element_offsets(len(shape))
    vec = shape.vector

    def amp(x):
        return np.abs(np.exp(-1j * kd * np.multiply.outer(x, offsets)) @ vec)

    xs = np.linspace(-period / 2, period / 2, grid)
    i = int(np.argmax(amp(xs)))
    step = xs[1] - xs[0]
    best = _golden_max(lambda x: float(amp(np.array([x]))[0]), xs[i] - step, xs[i] + step, tol)
    return float(best)


@dataclass(frozen=True, eq=False)
class Codebook:
    """``M x M`` codewords generated by shifting one beam shape along both axes."""

    shape: BeamShape
    M: int
    spacing: float
    wavelength: float
    kind: str = "custom"
    lobe_offset: float = field(init=False)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown codebook kind {self.kind!r}")
        object.__setattr__(self, "lobe_offset", shape_lobe_offset(self.shape, self.spacing, self.wavelength))
        W = np.stack([codeword_axis_vector(self.shape, m, self.M, self.spacing, self.wavelength) for m in range(self.M)])
        W.setflags(write=False)
        object.__setattr__(self, "axis_vectors", W)
        a = self._lobe_factors(np.arange(self.M))
        grid1, grid2 = np.meshgrid(a, a, indexing="ij")
        theta, phi = direction_from_phase_factors(grid1, grid2)
        lobes = np.stack([theta, phi], axis=-1)
        lobes.setflags(write=False)
        object.__setattr__(self, "main_lobes", lobes)

    @property
    def Q(self) -> int:
        return len(self.shape)

    @property
    def kd(self) -> float:
        return 2.0 * np.pi * self.spacing / self.wavelength

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.Q, self.Q, self.spacing, self.wavelength)

    def __len__(self):
        return self.M * self.M

    def codewords(self) -> list[Codeword]:
        return [Codeword(m1, m2) for m1 in range(self.M) for m2 in range(self.M)]

    def _lobe_factors(self, m, incident: float = 0.0):
        period = self.wavelength / self.spacing
        a = nominal_factor(m, self.M, self.spacing, self.wavelength) + self.lobe_offset + incident
        a = (a + period / 2) % period - period / 2
        return np.clip(a, -1.0, 1.0)

    def axis_gain(self, m, a, incident: float = 0.0) -> np.ndarray:
        """Per-axis gains ``a_axis(a)^H (w(m) (.) a_axis(incident))``, shape ``(len(a), len(m))``."""
        W = self.axis_vectors[np.atleast_1d(m)] * axis_response(self.Q, self.kd, incident)
        return np.conj(axis_response(self.Q, self.kd, np.atleast_1d(a))) @ W.T

    def gain_matrix(self, codewords, a1, a2, incident=(0.0, 0.0)) -> np.ndarray:
        """Reflection gains for every (codeword, point) pair, shape ``(n_codewords, n_points)``."""
        cw = np.asarray(codewords, dtype=int).reshape(-1, 2)
        g1 = self.axis_gain(cw[:, 0], a1, incident[0])
        g2 = self.axis_gain(cw[:, 1], a2, incident[1])
        return (g1 * g2).T

    def gains_at(self, codewords, theta, phi) -> np.ndarray:
        a1, a2 = irs_phase_factors(np.atleast_1d(theta), np.atleast_1d(phi))
        return self.gain_matrix(codewords, a1, a2)

    def lobe_factors(self, m: Codeword, incident=(0.0, 0.0)) -> tuple[float, float]:
        return float(self._lobe_factors(m[0], incident[0])), float(self._lobe_factors(m[1], incident[1]))


def full_codeword_vector(cb: Codebook, m) -> np.ndarray:
    """``w_1(m1) (x) w_2(m2)``; entries have modulus ``unit_gain**2``."""
    return np.kron(cb.axis_vectors[m[0]], cb.axis_vectors[m[1]])


def reflection_gain(cb: Codebook, m, d: Direction, incident: AzEl = AzEl(0.0, 0.0)) -> complex:
    """``a(d)^H diag(w(m)) a(incident)`` evaluated with the full ``Q^2`` vectors."""
    g = cb.geometry
    a1, a2 = irs_phase_factors(d.theta, d.phi)
    a_user = steering_from_factors(g, a1, a2)
    a_inc = steering_from_factors(g, *phase_factors(incident))
    return complex(np.vdot(a_user, full_codeword_vector(cb, m) * a_inc))


def main_lobe_direction(cb: Codebook, m, incident: AzEl = AzEl(0.0, 0.0)) -> Direction:
    """Direction maximising ``|g_m|``; found from the cached per-axis lobe offset."""
    if incident == (0.0, 0.0):
        theta, phi = cb.main_lobes[m[0], m[1]]
        return Direction(float(theta), float(phi))
    a1, a2 = cb.lobe_factors(m, phase_factors(incident))
    theta, phi = direction_from_phase_factors(a1, a2)
    return Direction(float(theta), float(phi))


def make_codebook(kind: str, Q: int, M: int, spacing: float, wavelength: float, shape: BeamShape | None = None) -> Codebook:
    if kind == "linear":
        shape = linear_profile(Q)
    elif kind == "quadratic":
        shape = quadratic_profile(Q, M, spacing, wavelength)
    elif shape is None:
        raise ValueError(f"codebook kind {kind!r} needs an explicit beam shape")
    return Codebook(shape, M, spacing, wavelength, kind)


class RandomConfigurations:
    """Independent uniformly random phase configurations over all ``Q^2`` cells.

    Duck-types the ``gain_matrix`` interface of :class:`Codebook`; codeword
    indices are ``(i, 0)`` pairs selecting the ``i``-th configuration.
    """

    def __init__(self, Q: int, count: int, spacing: float, wavelength: float, rng: np.random.Generator):
        self.geometry = ArrayGeometry(Q, Q, spacing, wavelength)
        self.vectors = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(count, Q * Q)))

    def codewords(self):
        return [Codeword(i, 0) for i in range(len(self.vectors))]

    def gain_matrix(self, codewords, a1, a2, incident=(0.0, 0.0)) -> np.ndarray:
        cw = np.asarray(codewords, dtype=int).reshape(-1, 2)
        a_user = steering_from_factors(self.geometry, np.atleast_1d(a1), np.atleast_1d(a2))
        a_inc = steering_from_factors(self.geometry, *incident)
        return (np.conj(a_user) @ (self.vectors[cw[:, 0]] * a_inc).T).T


def save_shape(path, cb_or_shape, *, kind: str = "custom", M: int | None = None, spacing_wl: float | None = None, extra: dict | None = None) -> None:
    """Write a beam shape as ``index phase_radians`` lines with ``#`` metadata headers."""
    if isinstance(cb_or_shape, Codebook):
        shape, kind, M = cb_or_shape.shape, cb_or_shape.kind, cb_or_shape.M
        spacing_wl = cb_or_shape.spacing / cb_or_shape.wavelength
    else:
        shape = cb_or_shape
    lines = [f"# kind = {kind}", f"# Q = {len(shape)}"]
    if M is not None:
        lines.append(f"# M = {M}")
    if spacing_wl is not None:
        lines.append(f"# d_over_lambda = {float(spacing_wl)!r}")
    lines.append(f"# unit_gain = {float(shape.unit_gain)!r}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    lines += [f"{i} {float(p)!r}" for i, p in enumerate(shape.phases)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_shape(path) -> tuple[BeamShape, dict]:
    meta: dict[str, str] = {}
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'index phase', got {line!r}")
        rows.append((int(parts[0]), float(parts[1])))
    rows.sort()
    if [i for i, _ in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: element indices must be 0..Q-1 without gaps")
    shape = BeamShape(np.array([p for _, p in rows]), float(meta.get("unit_gain", 1.0)))
    return shape, meta
