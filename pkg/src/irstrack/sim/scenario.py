"""Physical setup of one simulated trajectory: nodes, scatterers and the cascade.

For a user position the end-to-end gain of an IRS codeword ``w1 (x) w2``
under user combiner ``f`` is ``w1^T C_f w2`` with the ``Q x Q`` cascade
matrix ``C_f``. The IRS configuration also carries a fixed phase term that
cancels the incident BS wave, so codebook gains refer to a broadside
incident wave.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import ArrayNode, build_links, path_gain, place_scatterers
from ..geometry import IRS_AXES, ArrayGeometry, direction_from_phase_factors, local_phase_factors, steering_from_factors
from .config import RunConfig

UE_AXES = (np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
BS_AXES = (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
CHUNK = 256


def dft_codebook(rows: int, cols: int) -> np.ndarray:
    """All ``rows * cols`` Kronecker DFT beams, one per row."""

    def dft(n):
        k = np.arange(n)
        return np.exp(-2j * np.pi * np.outer(k, k) / n)

    d1, d2 = dft(rows), dft(cols)
    return np.stack([np.kron(d1[i], d2[j]) for i in range(rows) for j in range(cols)])


def user_combining(powers) -> int:
    """Index of the largest received power; ties go to the lowest index."""
    p = np.asarray(powers, dtype=float)
    if p.size == 0:
        raise ValueError("no combiner powers given")
    return int(np.argmax(p))


def snr_and_rate(h, tx_power: float, noise_variance: float, ue_antennas: int, overhead: float):
    """``SNR = |h|^2 P / (Q_UE sigma^2)`` and ``R = (1 - Gamma) log2(1 + SNR)``."""
    if not 0.0 <= overhead < 1.0:
        raise ValueError(f"overhead must lie in [0, 1), got {overhead}")
    snr = np.abs(h) ** 2 * tx_power / (ue_antennas * noise_variance)
    return snr, (1.0 - overhead) * np.log2(1.0 + snr)


@dataclass(eq=False)
class Scenario:
    cfg: RunConfig
    bs: ArrayNode
    irs: ArrayNode
    ue_geometry: ArrayGeometry
    scatterers_t: list
    scatterers_r: list
    combiners: np.ndarray
    incident: np.ndarray

    @classmethod
    def build(cls, cfg: RunConfig, rng: np.random.Generator) -> "Scenario":
        lam, d = cfg.wavelength, cfg.spacing
        bs = ArrayNode(cfg.bs_position, ArrayGeometry(cfg.bs_rows, cfg.bs_cols, d, lam), *BS_AXES)
        irs = ArrayNode(cfg.irs_position, ArrayGeometry(cfg.Q, cfg.Q, d, lam), IRS_AXES[0], IRS_AXES[1])
        ue_geom = ArrayGeometry(cfg.ue_rows, cfg.ue_cols, d, lam)
        mid = 0.5 * (np.asarray(cfg.bs_position) + np.asarray(cfg.irs_position))
        scat_t = place_scatterers(mid, cfg.L_t, rng, cfg.scatter_box)
        scat_r = place_scatterers(cfg.region_center, cfg.L_r, rng, cfg.scatter_box)
        # BS-side link is static: precompute H_t f_BS with f_BS aimed at the IRS
        ue_dummy = ArrayNode(cfg.region_center, ue_geom, *UE_AXES)
        link_t, _ = build_links(bs, irs, ue_dummy, scat_t, [], lam, rice_t=cfg.rice_t)
        f_bs = bs.steering_towards(np.asarray(cfg.irs_position))
        compensation = np.conj(irs.steering_towards(np.asarray(cfg.bs_position)))
        incident = compensation * (link_t.matrix @ f_bs)
        return cls(cfg, bs, irs, ue_geom, scat_t, scat_r, dft_codebook(cfg.ue_rows, cfg.ue_cols), incident)

    @property
    def Q(self) -> int:
        return self.cfg.Q

    @property
    def n_combiners(self) -> int:
        return len(self.combiners)

    def phase_factors(self, positions) -> tuple[np.ndarray, np.ndarray]:
        """IRS phase factors ``(A1, A2)`` of the LoS direction towards each position."""
        v = np.asarray(positions, dtype=float) - np.asarray(self.cfg.irs_position)
        u = v / np.linalg.norm(v, axis=-1, keepdims=True)
        return local_phase_factors(u, IRS_AXES[0], IRS_AXES[1])

    def directions(self, positions) -> np.ndarray:
        """``(theta, phi)`` of each position seen from the IRS, shape ``(..., 2)``."""
        a1, a2 = self.phase_factors(positions)
        theta, phi = direction_from_phase_factors(a1, a2)
        return np.stack([theta, phi], axis=-1)

    def _ue_response(self, positions, targets):
        v = np.asarray(targets, dtype=float) - positions
        u = v / np.linalg.norm(v, axis=-1, keepdims=True)
        b1, b2 = local_phase_factors(u, *UE_AXES)
        return steering_from_factors(self.ue_geometry, b1, b2)

    def _reflected(self, positions, combiners) -> np.ndarray:
        """``H_r^H f`` for each position and combiner, shape ``(n, n_f, Q^2)``.

        ``combiners`` is ``(n_f, Q_UE)`` shared by all positions or
        ``(n, n_f, Q_UE)`` per position.
        """
        cfg, lam = self.cfg, self.cfg.wavelength
        irs_pos = np.asarray(cfg.irs_position)
        n = positions.shape[0]
        dist_los = np.linalg.norm(positions - irs_pos, axis=-1)
        gains = [path_gain(dist_los, 1.0, lam)]
        a_irs = [self.irs.steering_towards(positions)]
        a_ue = [self._ue_response(positions, irs_pos)]
        for s in self.scatterers_r:
            sp = np.asarray(s.position)
            hop1 = np.linalg.norm(sp - irs_pos)
            hop2 = np.linalg.norm(positions - sp, axis=-1)
            gains.append(path_gain(hop1 + hop2, s.reflection_coefficient, lam))
            a_irs.append(np.broadcast_to(self.irs.steering_towards(sp), (n, cfg.Q**2)))
            a_ue.append(self._ue_response(positions, sp))
        gains = np.stack(gains, axis=-1)
        if gains.shape[-1] > 1:
            gains[:, 1:] *= (gains[:, :1] / (cfg.rice_r * gains[:, 1:].sum(axis=-1, keepdims=True)))
        A_irs = np.stack(a_irs, axis=1)  # (n, L, Q^2)
        A_ue = np.stack(a_ue, axis=1)  # (n, L, Q_UE)
        comb = np.broadcast_to(combiners, (n,) + np.shape(combiners)[-2:])
        proj = np.einsum("nlu,nfu->nlf", np.conj(A_ue), comb)  # a_ue^H f
        return np.einsum("nlq,nlf->nfq", A_irs, proj * np.sqrt(gains)[..., None])

    def cascade(self, positions, combiners=None) -> np.ndarray:
        """Cascade matrices ``C_f`` of shape ``(n, n_f, Q, Q)`` for positions ``(n, 3)``."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        combiners = self.combiners if combiners is None else np.atleast_2d(combiners)
        c = np.conj(self._reflected(positions, combiners)) * self.incident
        return c.reshape(positions.shape[0], combiners.shape[-2], self.Q, self.Q)

    def gains(self, positions, combiner_idx, w1, w2) -> np.ndarray:
        """``w1[i]^T C_{f_i}(p_i) w2[i]`` for per-sample combiners and axis vectors."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        n = positions.shape[0]
        f_idx = np.broadcast_to(np.asarray(combiner_idx), (n,))
        w1 = np.broadcast_to(w1, (n, self.Q))
        w2 = np.broadcast_to(w2, (n, self.Q))
        out = np.empty(n, dtype=complex)
        for lo in range(0, n, CHUNK):
            sl = slice(lo, lo + CHUNK)
            C = self.cascade(positions[sl], self.combiners[f_idx[sl]][:, None, :])[:, 0]
            out[sl] = np.einsum("np,npq,nq->n", w1[sl], C, w2[sl])
        return out
