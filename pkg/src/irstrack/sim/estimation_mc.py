"""Monte-Carlo evaluation of direction estimation against MSNR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import complex_noise
from ..codebook import Codebook, Codeword, RandomConfigurations
from ..estimation import (
    MeasurementSet,
    adjacent_codeword_set,
    build_hypothesis_grid,
    music_covariance,
    music_estimate,
    peak_ml_estimate,
)
from ..geometry import direction_from_phase_factors


@dataclass(frozen=True)
class EstimationSetup:
    Q: int = 16
    M: int = 15
    H: int = 10
    N: int = 5
    gamma: int = 1
    ue_antennas: int = 4
    trials: int = 500


def central_codeword(M: int) -> Codeword:
    return Codeword(M // 2, M // 2)


def estimation_mse(model, cb: Codebook, msnr_db: float, setup: EstimationSetup, rng: np.random.Generator,
                   estimator: str = "ml") -> np.ndarray:
    """Squared estimation errors (in ``(theta, phi)``) for ``setup.trials`` random test directions.

    ``model`` supplies the measurement gains (a codebook or random
    configurations); ``cb`` fixes the hypothesis grid around its central
    codeword. The combined noise per sample has variance ``Q_UE sigma^2``
    with ``sigma^2 = P = 1``, and the channel scalar has random phase and a
    magnitude such that the per-sample SNR of a focused IRS equals the MSNR.
    """
    m0 = central_codeword(cb.M)
    grid = build_hypothesis_grid(m0, cb, setup.H)
    if isinstance(model, RandomConfigurations):
        codewords = model.codewords()
    else:
        codewords = adjacent_codeword_set(m0, setup.gamma, cb.M)
    c1, c2 = grid.center_factors
    half = grid.half_width
    pilot = np.ones(setup.N, dtype=complex)
    amp = np.sqrt(10.0 ** (msnr_db / 10.0) * setup.ue_antennas) / setup.Q**2
    errors = np.empty(setup.trials)
    for i in range(setup.trials):
        a1 = c1 + rng.uniform(-half, half)
        a2 = c2 + rng.uniform(-half, half)
        xi = amp * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        g = model.gain_matrix(codewords, np.array([a1]), np.array([a2]))[:, 0]
        samples = g[:, None] * xi * pilot + complex_noise(rng, (len(codewords), setup.N), float(setup.ue_antennas))
        ms = MeasurementSet(codewords, samples, pilot)
        if estimator == "ml":
            est, _ = peak_ml_estimate(ms, grid, model, 1.0)
        elif estimator == "music":
            est = music_estimate(music_covariance(ms), ms, grid, model, 1.0)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        th, ph = direction_from_phase_factors(a1, a2)
        errors[i] = (est.theta - th) ** 2 + (est.phi - ph) ** 2
    return errors


CASES = (("optimized", "ml"), ("quadratic", "ml"), ("optimized", "music"), ("quadratic", "music"),
         ("random", "music"))


def estimation_experiment(cfg, cases=CASES) -> dict:
    """Squared errors per ``(codebook, estimator, msnr_db)`` for a run configuration.

    Every case sees the same test directions and noise at a given MSNR
    (common random numbers), so per-trial differences are paired. Random
    configurations are scored on the quadratic codebook's hypothesis grid.
    """
    from .schemes import dt_codebook, ide_codebook

    setup = EstimationSetup(Q=cfg.Q, M=cfg.M, H=cfg.H, N=cfg.N_IDE, gamma=cfg.gamma, ue_antennas=cfg.ue_antennas,
                            trials=cfg.est_trials)
    quad = dt_codebook(cfg)
    models = {"quadratic": quad}
    if any(kind == "optimized" for kind, _ in cases):
        models["optimized"] = ide_codebook(cfg.with_(ide_codebook="optimized"))
    if any(kind == "random" for kind, _ in cases):
        models["random"] = RandomConfigurations(cfg.Q, cfg.n_ide_codewords, cfg.spacing, cfg.wavelength,
                                                np.random.default_rng([cfg.seed, 3]))
    out = {}
    for kind, est in cases:
        model = models[kind]
        grid_cb = model if isinstance(model, Codebook) else quad
        for msnr in cfg.est_msnr_db:
            rng = np.random.default_rng([cfg.seed, 4, int(round(msnr * 100))])
            out[(kind, est, msnr)] = estimation_mse(model, grid_cb, msnr, setup, rng, est)
    return out
