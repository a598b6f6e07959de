"""Monte-Carlo campaigns over trajectories, noise seeds and transmit powers."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, dbm_to_watt
from .scenario import Scenario
from .schemes import (
    RunResult,
    dt_codebook,
    ide_codebook,
    make_schedule,
    rescale,
    run_focusing_baseline,
    run_hierarchical_baseline,
    run_perfect_codeword_baseline,
    run_ut_scheme,
)
from .trajectory import Trajectory, generate_trajectory

BASELINES = {
    "perfect": run_perfect_codeword_baseline,
    "focusing": run_focusing_baseline,
    "hierarchical": run_hierarchical_baseline,
}


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    ptx_dbm: float
    mean_snr_db: float
    mean_rate: float
    loss_prob: float
    trials: int


@dataclass
class CampaignResult:
    rows: list
    prediction_error: list = field(default_factory=list)  # (time_s, pred_err, scheme)

    def row(self, scheme: str, ptx_dbm: float) -> SummaryRow:
        for r in self.rows:
            if r.scheme == scheme and r.ptx_dbm == ptx_dbm:
                return r
        raise KeyError((scheme, ptx_dbm))


def trajectory_rng(cfg: RunConfig, index: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, 0, index])


def noise_rng(cfg: RunConfig, index: int, seed_index: int) -> np.random.Generator:
    # same noise stream for every transmit power (common random numbers)
    return np.random.default_rng([cfg.seed, 1, index, seed_index])


def make_trial(cfg: RunConfig, index: int) -> tuple[Trajectory, Scenario]:
    rng = trajectory_rng(cfg, index)
    traj = generate_trajectory(cfg.trajectory_kind, cfg.region_center, cfg.r1, cfg.r2, cfg.speed, rng)
    return traj, Scenario.build(cfg, rng)


@dataclass
class _Partial:
    """Per-run sums: ``(sum snr, sum rate, samples, lost)`` keyed by ``(scheme, ptx index, run key)``."""

    sums: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)

    def add(self, scheme: str, p_idx: int, key: tuple, res: RunResult) -> None:
        self.sums[(scheme, p_idx, key)] = (math.fsum(res.snr), math.fsum(res.rate), res.snr.size, res.lost)


def block_errors(res: RunResult, cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-block mean prediction error with the block start times."""
    T = float(cfg.T)
    k = np.floor(res.times / T + 1e-9).astype(int)
    blocks = np.unique(k)
    return blocks * T, np.array([res.prediction_error[k == b].mean() for b in blocks])


def _run_trajectory(cfg: RunConfig, index: int, dt_cb, ide_cb) -> _Partial:
    traj, scn = make_trial(cfg, index)
    out = _Partial()
    p_ref = 1.0
    for scheme, runner in BASELINES.items():
        if scheme not in cfg.schemes:
            continue
        base = runner(cfg, traj, scn, p_ref, dt_cb=dt_cb) if scheme != "focusing" else runner(cfg, traj, scn, p_ref)
        for p_idx, p_dbm in enumerate(cfg.ptx_dbm):
            out.add(scheme, p_idx, (index,), rescale(base, dbm_to_watt(p_dbm) / p_ref))
    if "proposed" in cfg.schemes:
        for j in range(cfg.seeds):
            for p_idx, p_dbm in enumerate(cfg.ptx_dbm):
                res = run_ut_scheme(cfg, traj, scn, dbm_to_watt(p_dbm), noise_rng(cfg, index, j), seed=j,
                                    dt_cb=dt_cb, ide_cb=ide_cb)
                out.add("proposed", p_idx, (index, j), res)
                out.blocks[(p_idx, index, j)] = block_errors(res, cfg)
    return out


def _reduce(cfg: RunConfig, partials: list) -> list[SummaryRow]:
    merged: dict = {}
    for part in partials:
        merged.update(part.sums)
    rows = []
    for scheme in cfg.schemes:
        for p_idx, p_dbm in enumerate(cfg.ptx_dbm):
            keys = sorted(k for (s, p, k) in merged if s == scheme and p == p_idx)
            runs = [merged[(scheme, p_idx, k)] for k in keys]
            kept = [r for r in runs if not r[3]]
            n_samples = sum(r[2] for r in kept)
            if n_samples:
                mean_snr = math.fsum(r[0] for r in kept) / n_samples
                mean_rate = math.fsum(r[1] for r in kept) / n_samples
                snr_db = 10.0 * math.log10(mean_snr) if mean_snr > 0 else float("-inf")
            else:
                snr_db, mean_rate = float("nan"), float("nan")
            loss = (len(runs) - len(kept)) / len(runs) if runs else float("nan")
            rows.append(SummaryRow(scheme, p_dbm, snr_db, mean_rate, loss, len(runs)))
    return rows


def mc_campaign(cfg: RunConfig, threads: int = 1) -> CampaignResult:
    """Run every scheme over ``cfg.trajectories`` trajectories and ``cfg.seeds`` noise seeds.

    Baselines are noiseless, so they run once per trajectory and their SNR is
    rescaled to each transmit power. Lost runs of the proposed scheme are
    excluded from the means and reported through ``loss_prob``. Results do
    not depend on ``threads``.
    """
    make_schedule(cfg)  # validates the time budget up front
    dt_cb = dt_codebook(cfg)
    ide_cb = ide_codebook(cfg) if "proposed" in cfg.schemes else None
    indices = range(cfg.trajectories)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda i: _run_trajectory(cfg, i, dt_cb, ide_cb), indices))
    else:
        partials = [_run_trajectory(cfg, i, dt_cb, ide_cb) for i in indices]
    series = []
    if "proposed" in cfg.schemes:
        # prediction-error series: first trajectory, averaged over noise seeds, highest power
        p_idx = len(cfg.ptx_dbm) - 1
        runs = [partials[0].blocks[(p_idx, 0, j)] for j in range(cfg.seeds)]
        times = runs[0][0]
        mean = np.mean([r[1] for r in runs], axis=0)
        series = [(float(t), float(e), "proposed") for t, e in zip(times, mean)]
    return CampaignResult(_reduce(cfg, partials), series)


def prediction_error_series(cfg: RunConfig, trajectory: Trajectory, scenario: Scenario, tx_power: float,
                            seeds: int, label: str) -> list[tuple]:
    """Per-block prediction error on one trajectory averaged over ``seeds`` noise realisations."""
    dt_cb, ide_cb = dt_codebook(cfg), ide_codebook(cfg)
    errs = []
    times = None
    for j in range(seeds):
        res = run_ut_scheme(cfg, trajectory, scenario, tx_power, np.random.default_rng([cfg.seed, 2, j]), seed=j,
                            dt_cb=dt_cb, ide_cb=ide_cb)
        times, e = block_errors(res, cfg)
        errs.append(e)
    mean = np.mean(errs, axis=0)
    return [(float(t), float(e), label) for t, e in zip(times, mean)]


@dataclass(frozen=True)
class TransitionReport:
    block: int
    spike: float
    linear_median: float
    settled: float
    recovery_blocks: int | None


def _clean_blocks(segment, S_max: int, T: float, blocks: int) -> list[int]:
    """Blocks whose fit window and whole duration lie inside ``segment``."""
    eps = 1e-9
    return [k for k in range(1, blocks)
            if (k - S_max + 1) * T >= segment.t0 - eps and (k + 1) * T <= segment.t1 + eps]


def transition_recovery(trajectory: Trajectory, errors, S_max: int, T: float) -> list[TransitionReport]:
    """Spike and recovery at each non-smooth point of ``trajectory``.

    ``errors[k]`` is the mean prediction error of block ``k``. The linear
    reference is the median error over blocks that only see one straight
    segment; the settled level of a segment is the median over its blocks
    whose fit window excludes older segments. The spike is the larger error
    of the transition block and its successor, and recovery is the first
    later block whose error is within three times the larger of the two
    levels.
    """
    e = np.asarray(errors, dtype=float)
    nb = e.size
    lines = [s for s in trajectory.segments if s.kind == "line"]
    linear = [e[k] for s in lines for k in _clean_blocks(s, S_max, T, nb)]
    if not linear:
        raise ValueError("no block lies fully inside a straight segment")
    L = float(np.median(linear))
    out = []
    for seg in trajectory.segments[1:]:
        kc = int(np.floor(seg.t0 / T))
        if kc + 1 >= nb:
            continue
        settled_blocks = _clean_blocks(seg, S_max, T, nb)
        settled = float(np.median(e[settled_blocks])) if settled_blocks else L
        threshold = 3.0 * max(L, settled)
        rec = next((j for j in range(1, nb - kc) if e[kc + j] <= threshold), None)
        out.append(TransitionReport(kc, float(max(e[kc], e[kc + 1])), L, settled, rec))
    return out
