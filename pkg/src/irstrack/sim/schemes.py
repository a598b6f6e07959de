"""Algorithm runners: the proposed tracking scheme and the three baselines.

All schemes are evaluated at the same sample times (the CE sub-block starts
of the proposed schedule, thinned by ``sample_every``), which makes
per-sample comparisons meaningful. The baselines are idealised: they see
the noiseless channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

from ..beamopt import DesignConfig, DesignResult, optimize_beam_shape
from ..channel import complex_noise
from ..codebook import (
    BeamShape,
    Codebook,
    Codeword,
    linear_profile,
    make_codebook,
    quadratic_profile,
    shape_lobe_offset,
    steered_axis_vector,
)
from ..estimation import MeasurementSet, adjacent_codeword_set, build_hypothesis_grid, peak_ml_estimate
from ..tracking import (
    EstimateHistory,
    fit_polynomial,
    kalman_init,
    kalman_predict,
    kalman_update,
)
from .config import RunConfig
from .scenario import Scenario, snr_and_rate, user_combining
from .schedule import (
    TimeBlockSchedule,
    build_schedule,
    focusing_overhead,
    focusing_pilots,
    hierarchical_timing,
    overhead_ratio,
    perfect_overhead,
)
from .trajectory import Trajectory


class MetricsRecord(NamedTuple):
    time: float
    snr: float
    effective_rate: float
    prediction_error: float
    selected_codeword: tuple
    scheme: str
    trial_seed: int


class IrsEvent(NamedTuple):
    """One IRS reconfiguration; ``kappa`` is -1 for UC and the codeword slot for IDE."""

    kind: str
    block: int
    kappa: int
    codeword: tuple


@dataclass(eq=False)
class RunResult:
    scheme: str
    times: np.ndarray
    snr: np.ndarray
    overhead: Fraction
    codewords: np.ndarray
    prediction_error: np.ndarray | None = None
    lost: bool = False
    lost_at_block: int | None = None
    seed: int = 0
    events: list = field(default_factory=list)
    estimates: list = field(default_factory=list)

    @property
    def rate(self) -> np.ndarray:
        return (1.0 - float(self.overhead)) * np.log2(1.0 + self.snr)

    def records(self) -> Iterator[MetricsRecord]:
        rate = self.rate
        for i in range(self.times.size):
            pe = float(self.prediction_error[i]) if self.prediction_error is not None else float("nan")
            yield MetricsRecord(float(self.times[i]), float(self.snr[i]), float(rate[i]), pe,
                                tuple(int(x) for x in self.codewords[i]), self.scheme, self.seed)


# --------------------------------------------------------------------------- setup


def make_schedule(cfg: RunConfig) -> TimeBlockSchedule:
    return build_schedule(cfg.T, cfg.slot, cfg.T_S, cfg.ue_antennas, cfg.N_UC, cfg.N_IDE, cfg.n_ide_codewords, cfg.N_CE)


def n_blocks(cfg: RunConfig, trajectory: Trajectory) -> int:
    """Complete time blocks that fit into the trajectory."""
    return max(1, math.floor(trajectory.duration / cfg.T + 1e-12))


def sample_grid(cfg: RunConfig, schedule: TimeBlockSchedule, blocks: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample times with their block and slot indices."""
    kappas = np.arange(0, schedule.eta, cfg.sample_every)
    k = np.repeat(np.arange(blocks), kappas.size)
    kap = np.tile(kappas, blocks)
    base = float(schedule.T_UC + schedule.T_IDE)
    times = k * float(schedule.T) + base + kap * float(schedule.slot)
    return times, k, kap


def dt_codebook(cfg: RunConfig) -> Codebook:
    return make_codebook("quadratic", cfg.Q, cfg.M, cfg.spacing, cfg.wavelength)


def design_snr_from_msnr(msnr_db: float, N: int) -> float:
    """Objective coefficient matching a per-sample MSNR with ``N`` pilots per codeword."""
    return N * 10.0 ** (msnr_db / 10.0) / 2.0


def design_setup(cfg: RunConfig) -> tuple[BeamShape, DesignConfig]:
    """Initial shape and optimizer settings for the IDE codebook of ``cfg``."""
    if cfg.design_init == "quadratic":
        init = quadratic_profile(cfg.Q, cfg.M, cfg.spacing_wl, 1.0)
    else:
        init = linear_profile(cfg.Q)
    snr = cfg.design_snr if cfg.design_snr >= 0 else design_snr_from_msnr(cfg.design_msnr_db, cfg.N_IDE)
    dcfg = DesignConfig(cfg.Q, cfg.M, design_snr=snr, grid_G=cfg.design_grid, step=cfg.design_step or None,
                        decay=cfg.design_decay, stop_tol=cfg.design_stop_tol, coverage=cfg.coverage,
                        spacing_wl=cfg.spacing_wl, gamma=cfg.gamma, max_iter=cfg.design_max_iter)
    return init, dcfg


@lru_cache(maxsize=16)
def _optimized(init_phases: tuple, dcfg: DesignConfig) -> DesignResult:
    return optimize_beam_shape(BeamShape(np.array(init_phases)), dcfg)


def optimized_design(cfg: RunConfig) -> DesignResult:
    """Optimizer result for ``cfg``, cached across calls."""
    init, dcfg = design_setup(cfg)
    return _optimized(tuple(init.phases), dcfg)


def ide_codebook(cfg: RunConfig) -> Codebook:
    if cfg.ide_codebook == "optimized":
        shape = optimized_design(cfg).shape
        return make_codebook("optimized", cfg.Q, cfg.M, cfg.spacing, cfg.wavelength, shape)
    return make_codebook(cfg.ide_codebook, cfg.Q, cfg.M, cfg.spacing, cfg.wavelength)


def nearest_codewords(dirs, cb: Codebook) -> np.ndarray:
    """Vectorised nearest main lobe for directions ``(n, 2)``; ties go to the smallest index."""
    lobes = cb.main_lobes.reshape(-1, 2)
    dirs = np.atleast_2d(dirs)
    d2 = ((dirs[:, None, 0] - lobes[None, :, 0]) ** 2 + (dirs[:, None, 1] - lobes[None, :, 1]) ** 2)
    flat = np.argmin(d2, axis=1)
    return np.stack(np.unravel_index(flat, (cb.M, cb.M)), axis=1)


# --------------------------------------------------------------------------- predictors


class PolynomialPredictor:
    def __init__(self, S_max: int, degree: int):
        self.history = EstimateHistory(S_max)
        self.degree = degree
        self.model = None

    def observe(self, t: float, z) -> None:
        self.history.append(t, z)
        self.model = fit_polynomial(self.history, self.degree)

    def predict(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = t - self.model.fitted_at
        acc = np.zeros((t.size, 2))
        for col in self.model.coefficients.T[::-1]:
            acc = acc * x[:, None] + col
        return acc


class KalmanPredictor:
    """Constant-velocity filter; between updates the state is extrapolated linearly."""

    def __init__(self, T: float, q_var: float, r_var: float):
        self.T, self.q_var, self.r_var = T, q_var, r_var
        self.state = None
        self.t_last = 0.0

    def observe(self, t: float, z) -> None:
        if self.state is None:
            self.state = kalman_init(z, self.T, self.q_var, self.r_var)
        else:
            self.state = kalman_update(kalman_predict(self.state), z)
        self.t_last = float(t)

    def predict(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = self.state.x
        dt = t - self.t_last
        return np.stack([x[0] + x[1] * dt, x[2] + x[3] * dt], axis=1)


def make_predictor(cfg: RunConfig):
    if cfg.predictor == "kalman":
        return KalmanPredictor(float(cfg.T), cfg.kalman_q, cfg.kalman_r)
    return PolynomialPredictor(cfg.S_max, cfg.degree)


# --------------------------------------------------------------------------- proposed scheme


def _combiner_powers(scn: Scenario, position, w1, w2, tx_power, pilots: int, rng, noiseless: bool) -> np.ndarray:
    C = scn.cascade(position)[0]  # (n_f, Q, Q)
    h = np.einsum("p,fpq,q->f", w1, C, w2)
    if noiseless:
        return np.abs(h) ** 2 * tx_power
    noise_var = scn.cfg.ue_antennas * scn.cfg.noise_variance
    r = h[:, None] * np.sqrt(tx_power) + complex_noise(rng, (h.size, pilots), noise_var)
    return np.mean(np.abs(r) ** 2, axis=1)


def run_ut_scheme(cfg: RunConfig, trajectory: Trajectory, scenario: Scenario, tx_power: float,
                  rng: np.random.Generator, seed: int = 0, *, dt_cb: Codebook | None = None,
                  ide_cb: Codebook | None = None) -> RunResult:
    """The proposed scheme: per block UC, IDE with grid ML, fit, then extrapolated DT codewords.

    Noise is skipped when ``cfg.noiseless`` is set. The run is flagged as lost
    once the true direction stays outside the IDE hypothesis region for
    ``cfg.loss_blocks`` consecutive blocks; it continues regardless.
    """
    scn = scenario
    sched = make_schedule(cfg)
    dt_cb = dt_cb or dt_codebook(cfg)
    ide_cb = ide_cb or ide_codebook(cfg)
    blocks = n_blocks(cfg, trajectory)
    times, k_idx, _ = sample_grid(cfg, sched, blocks)
    T, T_UC, slot_N = float(sched.T), float(sched.T_UC), float(cfg.N_IDE * sched.T_S)
    noiseless = cfg.noiseless
    noise_var = cfg.ue_antennas * cfg.noise_variance
    pilot = np.full(cfg.N_IDE, np.sqrt(tx_power), dtype=complex)

    predictor = make_predictor(cfg)
    truth0 = scn.directions(trajectory.position(0.0))
    m_dt = tuple(nearest_codewords(truth0, dt_cb)[0])
    m_ide = tuple(nearest_codewords(truth0, ide_cb)[0])

    snr = np.empty(times.size)
    pred_err = np.empty(times.size)
    chosen = np.empty((times.size, 2), dtype=int)
    events: list[IrsEvent] = []
    estimates = []
    outside = 0
    lost_at = None
    per_block = np.searchsorted(k_idx, np.arange(blocks + 1))
    all_kappas = np.arange(sched.eta)

    for k in range(blocks):
        t_k = k * T
        # UC: combiner sweep under the predicted DT codeword
        events.append(IrsEvent("UC", k, -1, m_dt))
        powers = _combiner_powers(scn, trajectory.position(t_k), dt_cb.axis_vectors[m_dt[0]], dt_cb.axis_vectors[m_dt[1]],
                                  tx_power, cfg.N_UC, rng, noiseless)
        f_k = user_combining(powers)

        # IDE: one codeword per N-pilot slot
        cws = adjacent_codeword_set(Codeword(*m_ide), cfg.gamma, ide_cb.M)
        t_ide = t_k + T_UC + slot_N * np.arange(len(cws))
        cw = np.asarray(cws)
        h = scn.gains(trajectory.position(t_ide), f_k, ide_cb.axis_vectors[cw[:, 0]], ide_cb.axis_vectors[cw[:, 1]])
        samples = h[:, None] * pilot
        if not noiseless:
            samples = samples + complex_noise(rng, samples.shape, noise_var)
        for i, m in enumerate(cws):
            events.append(IrsEvent("IDE", k, i, tuple(m)))
        grid = build_hypothesis_grid(Codeword(*m_ide), ide_cb, cfg.H, cfg.coverage)
        est, _ = peak_ml_estimate(MeasurementSet(cws, samples, pilot), grid, ide_cb, tx_power)
        estimates.append((t_k, est))
        a1, a2 = scn.phase_factors(trajectory.position(t_ide[0]))
        outside = 0 if grid.contains(float(a1), float(a2)) else outside + 1
        if outside >= cfg.loss_blocks and lost_at is None:
            lost_at = k
        predictor.observe(t_k, est)

        # CE/D: codeword from the extrapolated direction at every slot start
        slot_times = t_k + float(sched.T_UC + sched.T_IDE) + all_kappas * float(sched.slot)
        slot_cw = nearest_codewords(predictor.predict(slot_times), dt_cb)
        events.extend(IrsEvent("CE", k, int(j), (int(a), int(b))) for j, (a, b) in zip(all_kappas, slot_cw))
        sl = slice(per_block[k], per_block[k + 1])
        ts = times[sl]
        sel = slot_cw[:: cfg.sample_every]
        pos = trajectory.position(ts)
        h = scn.gains(pos, f_k, dt_cb.axis_vectors[sel[:, 0]], dt_cb.axis_vectors[sel[:, 1]])
        snr[sl], _ = snr_and_rate(h, tx_power, cfg.noise_variance, cfg.ue_antennas, 0.0)
        pred_err[sl] = np.sum((predictor.predict(ts) - scn.directions(pos)) ** 2, axis=1)
        chosen[sl] = sel

        # next block's UC and IDE codewords
        nxt = predictor.predict((k + 1) * T)
        m_dt = tuple(int(x) for x in nearest_codewords(nxt, dt_cb)[0])
        m_ide = tuple(int(x) for x in nearest_codewords(nxt, ide_cb)[0])

    return RunResult("proposed", times, snr, overhead_ratio(sched), chosen, pred_err, lost_at is not None, lost_at,
                     seed, events, estimates)


def reconfiguration_times(events, schedule: TimeBlockSchedule, N_IDE: int) -> dict:
    """Exact times of the logged IRS reconfigurations, grouped by sub-block kind."""
    out: dict[str, list] = {"UC": [], "IDE": [], "CE": []}
    for e in events:
        if e.kind == "UC":
            out["UC"].append(schedule.block_start(e.block))
        elif e.kind == "IDE":
            out["IDE"].append(schedule.ide_start(e.block) + e.kappa * N_IDE * schedule.T_S)
        else:
            out["CE"].append(schedule.slot_start(e.block, e.kappa))
    return out


# --------------------------------------------------------------------------- baselines


def _cascades(scn: Scenario, positions, chunk: int = 64):
    for lo in range(0, len(positions), chunk):
        yield lo, scn.cascade(positions[lo:lo + chunk])


def _snr(power, tx_power: float, cfg: RunConfig) -> np.ndarray:
    return power * tx_power / (cfg.ue_antennas * cfg.noise_variance)


def run_perfect_codeword_baseline(cfg: RunConfig, trajectory: Trajectory, scenario: Scenario, tx_power: float,
                                  dt_cb: Codebook | None = None) -> RunResult:
    """Per-sample exhaustive search over all codewords and combiners."""
    dt_cb = dt_cb or dt_codebook(cfg)
    sched = make_schedule(cfg)
    times, _, _ = sample_grid(cfg, sched, n_blocks(cfg, trajectory))
    pos = trajectory.position(times)
    W = dt_cb.axis_vectors
    power = np.empty(times.size)
    chosen = np.empty((times.size, 2), dtype=int)
    M = dt_cb.M
    for lo, C in _cascades(scenario, pos):
        G = np.abs(W @ C @ W.T) ** 2
        best = G.reshape(G.shape[0], -1).argmax(axis=1)
        power[lo:lo + len(C)] = G.reshape(G.shape[0], -1)[np.arange(len(C)), best]
        flat = best % (M * M)
        chosen[lo:lo + len(C)] = np.stack(np.unravel_index(flat, (M, M)), axis=1)
    return RunResult("perfect", times, _snr(power, tx_power, cfg), perfect_overhead(sched), chosen)


def run_focusing_baseline(cfg: RunConfig, trajectory: Trajectory, scenario: Scenario, tx_power: float) -> RunResult:
    """Per-cell conjugate phases with perfect CSI, best combiner per sample."""
    sched = make_schedule(cfg)
    times, _, _ = sample_grid(cfg, sched, n_blocks(cfg, trajectory))
    pos = trajectory.position(times)
    power = np.empty(times.size)
    for lo, C in _cascades(scenario, pos):
        power[lo:lo + len(C)] = np.max(np.sum(np.abs(C), axis=(2, 3)), axis=1) ** 2
    pilots = focusing_pilots(cfg.L_r, cfg.L_t, cfg.Q**2)
    return RunResult("focusing", times, _snr(power, tx_power, cfg), focusing_overhead(sched, pilots),
                     np.full((times.size, 2), -1))


@dataclass(frozen=True, eq=False)
class WideCodebook:
    """First search level: each wide word covers a 2 x 2 group of narrow codewords."""

    axis_vectors: np.ndarray
    children: tuple

    @property
    def size(self) -> int:
        """Wide words per axis."""
        return len(self.children)


def wide_codebook(cb: Codebook) -> WideCodebook:
    """Quadratic beams twice as wide as the narrow ones, centred on pairs of narrow lobes per axis."""
    Mw = math.ceil(cb.M / 2)
    wl = cb.wavelength
    shape = quadratic_profile(cb.Q, Mw, cb.spacing, wl)
    offset = shape_lobe_offset(shape, cb.spacing, wl)
    # endfire lobes alias across the period; unwrap before averaging neighbours
    lobes = np.unwrap(cb._lobe_factors(np.arange(cb.M)), period=wl / cb.spacing)
    children, vecs = [], []
    for i in range(Mw):
        kids = tuple(j for j in (2 * i, 2 * i + 1) if j < cb.M)
        target = float(np.mean(lobes[list(kids)])) - offset
        vecs.append(steered_axis_vector(shape, target, cb.spacing, wl))
        children.append(kids)
    return WideCodebook(np.stack(vecs), tuple(children))


def hierarchical_search(C: np.ndarray, cb: Codebook, wide: WideCodebook) -> tuple[int, int]:
    """Two-level noiseless power search on one cascade matrix ``C`` (Q x Q)."""
    Gw = np.abs(wide.axis_vectors @ C @ wide.axis_vectors.T) ** 2
    i1, i2 = np.unravel_index(int(np.argmax(Gw)), Gw.shape)
    k1, k2 = list(wide.children[i1]), list(wide.children[i2])
    W = cb.axis_vectors
    Gn = np.abs(W[k1] @ C @ W[k2].T) ** 2
    j1, j2 = np.unravel_index(int(np.argmax(Gn)), Gn.shape)
    return k1[j1], k2[j2]


def run_hierarchical_baseline(cfg: RunConfig, trajectory: Trajectory, scenario: Scenario, tx_power: float,
                              dt_cb: Codebook | None = None) -> RunResult:
    """Noiseless two-level search once per block; the result is held until the next search completes.

    The combiner comes from a noiseless UC sweep at the block start under the
    codeword currently held.
    """
    dt_cb = dt_cb or dt_codebook(cfg)
    wide = wide_codebook(dt_cb)
    sched = make_schedule(cfg)
    timing = hierarchical_timing(sched, wide.size**2, cfg.N_HS, cfg.L_C)
    blocks = n_blocks(cfg, trajectory)
    times, k_idx, _ = sample_grid(cfg, sched, blocks)
    W = dt_cb.axis_vectors
    truth0 = scenario.directions(trajectory.position(0.0))
    held = tuple(int(x) for x in nearest_codewords(truth0, dt_cb)[0])
    power = np.empty(times.size)
    chosen = np.empty((times.size, 2), dtype=int)
    per_block = np.searchsorted(k_idx, np.arange(blocks + 1))
    for k in range(blocks):
        t_k = k * float(sched.T)
        C0 = scenario.cascade(trajectory.position(t_k))[0]
        f_k = user_combining(np.abs(np.einsum("p,fpq,q->f", W[held[0]], C0, W[held[1]])) ** 2)
        t_search = t_k + float(sched.T_UC)
        new = hierarchical_search(scenario.cascade(trajectory.position(t_search))[0, f_k], dt_cb, wide)
        ready = t_search + float(timing.T_HS)
        sl = slice(per_block[k], per_block[k + 1])
        ts = times[sl]
        cws = np.where((ts >= ready)[:, None], np.asarray(new), np.asarray(held))
        h = scenario.gains(trajectory.position(ts), f_k, W[cws[:, 0]], W[cws[:, 1]])
        power[sl] = np.abs(h) ** 2
        chosen[sl] = cws
        held = new
    return RunResult("hierarchical", times, _snr(power, tx_power, cfg), timing.overhead, chosen)


def rescale(result: RunResult, factor: float, seed: int = 0) -> RunResult:
    """Copy of a noiseless baseline result with its SNR scaled by ``factor`` (a transmit-power ratio)."""
    return RunResult(result.scheme, result.times, result.snr * factor, result.overhead, result.codewords,
                     result.prediction_error, result.lost, result.lost_at_block, seed)
