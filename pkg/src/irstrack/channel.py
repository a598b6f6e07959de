"""Geometric Rician channels for the BS -> IRS -> UE cascade.

Path gains are stored as power gains ``(upsilon lambda / (4 pi delta))^2``;
the channel matrices carry their square roots as path amplitudes, so the
Rice factor is the usual LoS-to-NLoS power ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import ArrayGeometry, local_phase_factors, steering_from_factors, unit_vector

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Scatterer:
    position: tuple
    reflection_coefficient: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.reflection_coefficient <= 1.0:
            raise ValueError(f"reflection coefficient must lie in (0, 1], got {self.reflection_coefficient}")


@dataclass(frozen=True)
class ArrayNode:
    """A UPA placed in the world frame; ``axis1``/``axis2`` span the array plane."""

    position: tuple
    geometry: ArrayGeometry
    axis1: tuple
    axis2: tuple

    def steering_towards(self, points) -> np.ndarray:
        """Steering vectors towards one or more points, shape ``(..., size)``."""
        v = np.asarray(points, dtype=float) - np.asarray(self.position, dtype=float)
        u = v / np.linalg.norm(v, axis=-1, keepdims=True)
        a1, a2 = local_phase_factors(u, self.axis1, self.axis2)
        return steering_from_factors(self.geometry, a1, a2)


@dataclass(frozen=True, eq=False)
class LinkChannel:
    """``H = A_rx diag(sqrt(gains)) A_tx^H``; path 0 is the LoS path."""

    steering_rx: np.ndarray
    steering_tx: np.ndarray
    path_gains: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.path_gains, dtype=float)
        if self.steering_rx.shape[1] != gains.size or self.steering_tx.shape[1] != gains.size:
            raise ValueError("steering matrices and path gains disagree on the number of paths")
        if np.any(gains <= 0):
            raise ValueError("path gains must be strictly positive")
        object.__setattr__(self, "path_gains", gains)

    @property
    def num_paths(self) -> int:
        return self.path_gains.size

    @property
    def matrix(self) -> np.ndarray:
        return (self.steering_rx * np.sqrt(self.path_gains)) @ self.steering_tx.conj().T

    @property
    def rice_factor(self) -> float:
        nlos = self.path_gains[1:].sum()
        return float(self.path_gains[0] / nlos) if nlos > 0 else float("inf")


@dataclass(frozen=True)
class EndToEndContext:
    xi: complex
    noise_variance: float
    ue_antennas: int
    tx_power: float

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError(f"noise variance must be positive, got {self.noise_variance}")
        if not self.tx_power > 0:
            raise ValueError(f"transmit power must be positive, got {self.tx_power}")


def path_gain(distance, reflection_coefficient, wavelength):
    """Free-space power gain ``(upsilon lambda / (4 pi delta))^2``."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("path length must be positive")
    return (reflection_coefficient * wavelength / (4.0 * np.pi * distance)) ** 2


def scale_for_rice_factor(link: LinkChannel, target_K: float) -> LinkChannel:
    """Rescale NLoS gains uniformly so that ``gain_LoS / sum(gain_NLoS) == target_K``."""
    if not target_K > 0:
        raise ValueError(f"Rice factor must be positive, got {target_K}")
    if link.num_paths < 2:
        raise ValueError("Rice factor is undefined for a link without NLoS paths")
    gains = link.path_gains.copy()
    gains[1:] *= gains[0] / (target_K * gains[1:].sum())
    return replace(link, path_gains=gains)


def _link(rx: ArrayNode, tx: ArrayNode, scatterers, wavelength) -> LinkChannel:
    points_rx = [tx.position] + [s.position for s in scatterers]
    points_tx = [rx.position] + [s.position for s in scatterers]
    _, los = unit_vector(tx.position, rx.position)
    gains = [path_gain(los, 1.0, wavelength)]
    for s in scatterers:
        _, d1 = unit_vector(tx.position, s.position)
        _, d2 = unit_vector(s.position, rx.position)
        gains.append(path_gain(d1 + d2, s.reflection_coefficient, wavelength))
    return LinkChannel(
        rx.steering_towards(np.array(points_rx, dtype=float)).T,
        tx.steering_towards(np.array(points_tx, dtype=float)).T,
        np.array(gains, dtype=float),
    )


def build_links(bs: ArrayNode, irs: ArrayNode, ue: ArrayNode, scatterers_t, scatterers_r, wavelength: float,
                rice_t: float | None = None, rice_r: float | None = None) -> tuple[LinkChannel, LinkChannel]:
    """BS->IRS and IRS->UE links with the LoS column first and one column per scatterer.

    Scattered paths are single-bounce; their length is the sum of both hops.
    When a Rice factor is given and the link has NLoS paths, the NLoS gains
    are rescaled to match it.
    """
    link_t = _link(irs, bs, scatterers_t, wavelength)
    link_r = _link(ue, irs, scatterers_r, wavelength)
    if rice_t is not None and link_t.num_paths > 1:
        link_t = scale_for_rice_factor(link_t, rice_t)
    if rice_r is not None and link_r.num_paths > 1:
        link_r = scale_for_rice_factor(link_r, rice_r)
    return link_t, link_r


def cascade(link_t: LinkChannel, link_r: LinkChannel, f_bs, f_ue) -> np.ndarray:
    """Per-cell cascade ``c`` such that ``h_e2e = sum(omega * c)``."""
    left = np.conj(link_r.matrix.conj().T @ np.asarray(f_ue))
    right = link_t.matrix @ np.asarray(f_bs)
    return left * right


def end_to_end_gain(link_t: LinkChannel, link_r: LinkChannel, omega, f_bs, f_ue) -> complex:
    """``f_ue^H H_r diag(omega) H_t f_bs``."""
    omega = np.asarray(omega)
    if omega.shape != (link_t.steering_rx.shape[0],):
        raise ValueError(f"omega has shape {omega.shape}, expected ({link_t.steering_rx.shape[0]},)")
    if link_r.steering_tx.shape[0] != omega.size:
        raise ValueError("IRS dimensions of the two links disagree")
    return complex(np.sum(omega * cascade(link_t, link_r, f_bs, f_ue)))


def los_xi(link_t: LinkChannel, link_r: LinkChannel, f_bs, f_ue) -> complex:
    """LoS-only scalar ``f_ue^H a_UE sqrt(g_r) sqrt(g_t) a_BS^H f_bs``."""
    ue_part = np.vdot(f_ue, link_r.steering_rx[:, 0])
    bs_part = np.vdot(link_t.steering_tx[:, 0], f_bs)
    return complex(ue_part * np.sqrt(link_r.path_gains[0] * link_t.path_gains[0]) * bs_part)


def complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_measurement(ctx: EndToEndContext, g_m: complex, pilot, rng: np.random.Generator) -> np.ndarray:
    """LoS-model pilot observation ``g_m xi s + w`` with ``w ~ CN(0, Q_UE sigma^2 I)``."""
    pilot = np.asarray(pilot, dtype=complex)
    noise = complex_noise(rng, pilot.shape, ctx.ue_antennas * ctx.noise_variance)
    return g_m * ctx.xi * pilot + noise


def full_measurement(link_t, link_r, omega, f_bs, f_ue, pilot, noise_variance: float, rng) -> np.ndarray:
    """Pilot observation through the full multipath cascade."""
    h = end_to_end_gain(link_t, link_r, omega, f_bs, f_ue)
    pilot = np.asarray(pilot, dtype=complex)
    noise_power = float(np.vdot(f_ue, f_ue).real) * noise_variance
    return h * pilot + complex_noise(rng, pilot.shape, noise_power)


def place_scatterers(center, count: int, rng: np.random.Generator, box: float = 20.0,
                     reflection_range=(0.1, 1.0)) -> list[Scatterer]:
    """Scatterers uniformly inside an axis-aligned box of side ``box`` around ``center``."""
    center = np.asarray(center, dtype=float)
    pos = center + rng.uniform(-box / 2, box / 2, size=(count, 3))
    ups = rng.uniform(*reflection_range, size=count)
    return [Scatterer(tuple(p), float(u)) for p, u in zip(pos, ups)]
