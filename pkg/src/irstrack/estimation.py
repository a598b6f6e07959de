"""Peak-ML and MUSIC direction estimation over a hypothesis grid.

The estimators only need a gain model exposing
``gain_matrix(codewords, a1, a2, incident)``; both :class:`Codebook` and
:class:`RandomConfigurations` qualify. Hypotheses live on an equally spaced
grid in phase-factor space centred on the main lobe of the IDE codeword.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codebook import Codebook, Codeword, angular_spacing
from .geometry import Direction, direction_from_phase_factors

MUSIC_FLOOR = 1e-15


class DegenerateSpectrumWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Received pilot vectors ``samples[i]`` for ``codewords[i]``."""

    codewords: tuple
    samples: np.ndarray
    pilot: np.ndarray

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=complex))
        pilot = np.asarray(self.pilot, dtype=complex).ravel()
        cws = tuple(Codeword(*map(int, m)) for m in self.codewords)
        if samples.shape != (len(cws), pilot.size):
            raise ValueError(f"samples have shape {samples.shape}, expected ({len(cws)}, {pilot.size})")
        if pilot.size < 1:
            raise ValueError("pilot must contain at least one symbol")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "pilot", pilot)
        object.__setattr__(self, "codewords", cws)

    @property
    def N(self) -> int:
        return self.pilot.size

    def entries(self) -> dict:
        return dict(zip(self.codewords, self.samples))


@dataclass(frozen=True, eq=False)
class HypothesisGrid:
    """``H x H`` hypotheses; point ``i * H + j`` pairs axis-1 value ``i`` with axis-2 value ``j``."""

    center: Direction
    center_factors: tuple
    half_width: float
    H: int
    a1: np.ndarray
    a2: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return direction_from_phase_factors(self.a1, self.a2)[0]

    @property
    def phi(self) -> np.ndarray:
        return direction_from_phase_factors(self.a1, self.a2)[1]

    def __len__(self):
        return self.a1.size

    def direction(self, index: int) -> Direction:
        theta, phi = direction_from_phase_factors(self.a1[index], self.a2[index])
        return Direction(float(theta), float(phi))

    def contains(self, a1, a2) -> bool:
        c1, c2 = self.center_factors
        eps = 1e-12
        return bool(abs(a1 - c1) <= self.half_width + eps and abs(a2 - c2) <= self.half_width + eps)


def adjacent_codeword_set(m_center, gamma: int, M: int) -> list[Codeword]:
    """Codewords within Chebyshev distance ``gamma`` of ``m_center``, clipped to the codebook."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    m1, m2 = m_center
    if not (0 <= m1 < M and 0 <= m2 < M):
        raise IndexError(f"codeword {tuple(m_center)} outside 0..{M - 1}")
    r1 = range(max(0, m1 - gamma), min(M, m1 + gamma + 1))
    r2 = range(max(0, m2 - gamma), min(M, m2 + gamma + 1))
    return [Codeword(i, j) for i in r1 for j in r2]


def build_hypothesis_grid(m_ide, cb: Codebook, H: int, width: float = 3.0, incident=(0.0, 0.0)) -> HypothesisGrid:
    """Equally spaced ``H x H`` grid of total width ``width * 2/M`` around the main lobe of ``m_ide``."""
    if H < 2:
        raise ValueError(f"H must be >= 2, got {H}")
    c1, c2 = cb.lobe_factors(m_ide, incident)
    R = width * angular_spacing(cb.M)
    steps = -R / 2 + R * np.arange(H) / (H - 1)
    g1, g2 = np.meshgrid(c1 + steps, c2 + steps, indexing="ij")
    theta, phi = direction_from_phase_factors(c1, c2)
    return HypothesisGrid(Direction(float(theta), float(phi)), (c1, c2), R / 2, H, g1.ravel(), g2.ravel())


def _xi_tilde(ms: MeasurementSet, G: np.ndarray, tx_power: float) -> np.ndarray:
    corr = ms.samples @ np.conj(ms.pilot)  # s^H r_m
    num = np.conj(G).T @ corr
    den = ms.N * tx_power * np.sum(np.abs(G) ** 2, axis=0)
    if np.any(den == 0):
        raise ZeroDivisionError("all reflection gains vanish at a hypothesis")
    return num / den


def xi_tilde(ms: MeasurementSet, gains, tx_power: float) -> complex:
    """Closed-form maximiser of the likelihood over the channel scalar."""
    if isinstance(gains, dict):
        gains = [gains[m] for m in ms.codewords]
    g = np.asarray(gains, dtype=complex).reshape(-1, 1)
    if g.shape[0] != len(ms.codewords):
        raise ValueError("one gain per codeword is required")
    return complex(_xi_tilde(ms, g, tx_power)[0])


def log_likelihood(ms: MeasurementSet, gains, xi: complex) -> float:
    """``-sum_m |r_m - g_m xi s|^2``, additive constants dropped."""
    g = np.asarray(gains, dtype=complex).reshape(-1, 1)
    return float(-np.sum(np.abs(ms.samples - g * xi * ms.pilot) ** 2))


def _hypothesis_gains(ms, grid, model, incident):
    return model.gain_matrix(ms.codewords, grid.a1, grid.a2, incident)


def peak_ml_estimate(ms: MeasurementSet, grid: HypothesisGrid, model, tx_power: float,
                     incident=(0.0, 0.0)) -> tuple[Direction, np.ndarray]:
    """Grid argmax of the likelihood concentrated over the channel scalar.

    Returns the estimate and the log-likelihood surface (length ``H^2``).
    Ties resolve to the smallest grid index.
    """
    if len(grid) == 0:
        raise ValueError("empty hypothesis grid")
    G = _hypothesis_gains(ms, grid, model, incident)
    xi = _xi_tilde(ms, G, tx_power)
    expected = (G * xi)[:, :, None] * ms.pilot
    resid = ms.samples[:, None, :] - expected
    surface = -np.sum(np.abs(resid) ** 2, axis=(0, 2))
    best = int(np.argmax(surface))
    return grid.direction(best), surface


def export_surface_csv(path, grid: HypothesisGrid, surface) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "phi", "loglik"])
        for th, ph, ll in zip(grid.theta, grid.phi, surface):
            w.writerow([repr(float(th)), repr(float(ph)), repr(float(ll))])


def music_covariance(ms: MeasurementSet) -> np.ndarray:
    """Sample covariance of the per-symbol snapshots ``r^n = [r_m[n]]_m``."""
    if not np.allclose(ms.pilot, ms.pilot[0], rtol=0, atol=1e-12 * max(1.0, abs(ms.pilot[0]))):
        raise ValueError("MUSIC requires identical pilot symbols")
    R = ms.samples
    S = R @ R.conj().T / ms.N
    return 0.5 * (S + S.conj().T)


def music_spectrum(S, ms: MeasurementSet, grid: HypothesisGrid, model, tx_power: float,
                   incident=(0.0, 0.0)) -> np.ndarray:
    """MUSIC pseudospectrum over the grid, one signal eigenvector assumed."""
    S = np.asarray(S, dtype=complex)
    if S.shape[0] < 2:
        raise ValueError("MUSIC needs at least two codewords")
    vals, vecs = np.linalg.eigh(S)
    if vals[-1] < (1.0 + 1e-9) * vals[-2]:
        warnings.warn("flat covariance spectrum; signal subspace is ill defined", DegenerateSpectrumWarning, stacklevel=2)
    noise = vecs[:, :-1]
    G = _hypothesis_gains(ms, grid, model, incident)
    a = G * _xi_tilde(ms, G, tx_power) * ms.pilot[0]
    # unit-norm steering: the xi scale would otherwise reward hypotheses with
    # vanishing expected signal
    norm = np.linalg.norm(a, axis=0, keepdims=True)
    a = np.divide(a, norm, out=np.zeros_like(a), where=norm > 0)
    den = np.sum(np.abs(noise.conj().T @ a) ** 2, axis=0)
    den = np.where(norm[0] > 0, den, 1.0)
    return 1.0 / np.maximum(den, MUSIC_FLOOR)


def music_estimate(S, ms: MeasurementSet, grid: HypothesisGrid, model, tx_power: float,
                   incident=(0.0, 0.0)) -> Direction:
    spec = music_spectrum(S, ms, grid, model, tx_power, incident)
    return grid.direction(int(np.argmax(spec)))
