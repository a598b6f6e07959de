"""Beam-shape design for direction estimation.

The objective approximates the direction-estimation MSE by a double
integral over the coverage region of ``|psi - psi'|^2`` weighted with the
probability of confusing ``psi`` and ``psi'``,

    F(rho) = sum_{p, p'} |psi_p - psi_p'|^2 exp(-c sum_m |g_m(p) - g_m(p')|^2),

with ``c = design_snr / Q^4`` (gains normalised by their coherent maximum).
Both the hypotheses and the integration grid live in phase-factor space,
centred on the broadside codeword, and the incident wave is taken as
broadside so that gains factorise per axis.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .codebook import BeamShape, angular_spacing
from .geometry import element_offsets

MAX_ITERATIONS = 500


@dataclass(frozen=True)
class DesignConfig:
    Q: int
    M: int
    design_snr: float | None = None
    grid_G: int = 15
    step: float | None = None
    decay: float = 0.995
    stop_tol: float = 1e-4
    coverage: float = 3.0
    spacing_wl: float = 0.5
    gamma: int = 1
    max_iter: int = MAX_ITERATIONS

    def __post_init__(self):
        if self.Q < 1 or self.M < 1:
            raise ValueError("Q and M must be positive")
        if self.grid_G < 8:
            raise ValueError(f"grid_G must be >= 8, got {self.grid_G}")
        if self.step is not None and not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not 0 < self.decay <= 1:
            raise ValueError(f"decay must lie in (0, 1], got {self.decay}")
        if not self.stop_tol > 0:
            raise ValueError(f"stop_tol must be positive, got {self.stop_tol}")
        if self.design_snr is not None and self.design_snr < 0:
            raise ValueError(f"design_snr must be >= 0, got {self.design_snr}")

    @property
    def width(self) -> float:
        """Coverage width ``R`` in phase-factor units."""
        return self.coverage * angular_spacing(self.M)


class MseObjectiveCache:
    """Steering terms and codeword ramps on the integration grid.

    ``conj_steer[k, q]`` is ``conj(exp(j kd a_k o_q))`` and ``ramps[j, q]``
    the ramp of the ``j``-th codeword offset. The pairwise distance matrix
    ``dist2`` is shape independent.
    """

    def __init__(self, cfg: DesignConfig):
        self.cfg = cfg
        G, R = cfg.grid_G, cfg.width
        kd = 2.0 * np.pi * cfg.spacing_wl
        self.axis = -R / 2 + R * (np.arange(G) + 0.5) / G
        self.conj_steer = np.exp(-1j * kd * np.multiply.outer(self.axis, element_offsets(cfg.Q)))
        offsets = np.arange(-cfg.gamma, cfg.gamma + 1)
        q = np.arange(1, cfg.Q + 1)
        self.ramps = np.exp(1j * kd * np.multiply.outer(offsets * angular_spacing(cfg.M), q))
        g1, g2 = np.meshgrid(self.axis, self.axis, indexing="ij")
        pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
        self.dist2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        # codeword m = (j1, j2) over all offset pairs
        J = len(offsets)
        self.pairs = [(j1, j2) for j1 in range(J) for j2 in range(J)]

    def axis_gains(self, rho) -> np.ndarray:
        """``(J, G)`` per-axis gains normalised by ``Q``."""
        w = np.exp(1j * np.asarray(rho, dtype=float))
        return (self.ramps * w) @ self.conj_steer.T / self.cfg.Q

    def gains(self, axis_g) -> np.ndarray:
        """``(n_codewords, G*G)`` normalised 2-D gains."""
        return np.stack([np.outer(axis_g[j1], axis_g[j2]).ravel() for j1, j2 in self.pairs])


def _coefficient(cfg: DesignConfig) -> float:
    return float(cfg.design_snr) if cfg.design_snr is not None else 1.0


def _gain_distance(g: np.ndarray) -> np.ndarray:
    power = np.sum(np.abs(g) ** 2, axis=0)
    cross = np.real(g.T @ g.conj())
    return np.maximum(power[:, None] + power[None, :] - 2.0 * cross, 0.0)


def _norm(cfg: DesignConfig) -> float:
    return 1.0 / cfg.grid_G**4


def equivocation_density(psi, psi_prime, shape: BeamShape, cfg: DesignConfig) -> float:
    """Unnormalised probability of confusing phase-factor points ``psi`` and ``psi_prime``."""
    kd = 2.0 * np.pi * cfg.spacing_wl
    offsets = element_offsets(cfg.Q)
    q = np.arange(1, cfg.Q + 1)
    js = np.arange(-cfg.gamma, cfg.gamma + 1) * angular_spacing(cfg.M)
    w = shape.vector

    def axis(a):
        return (np.exp(1j * kd * np.multiply.outer(js, q)) * w) @ np.exp(-1j * kd * a * offsets) / cfg.Q

    g = np.outer(axis(psi[0]), axis(psi[1])).ravel()
    h = np.outer(axis(psi_prime[0]), axis(psi_prime[1])).ravel()
    return float(np.exp(-_coefficient(cfg) * np.sum(np.abs(g - h) ** 2)))


def mse_hat(shape: BeamShape, cfg: DesignConfig, cache: MseObjectiveCache | None = None) -> float:
    """Midpoint-rule approximation of the estimation MSE for ``shape``."""
    cache = cache or MseObjectiveCache(cfg)
    g = cache.gains(cache.axis_gains(shape.phases))
    kernel = np.exp(-_coefficient(cfg) * _gain_distance(g))
    return float(np.sum(cache.dist2 * kernel) * _norm(cfg))


def mse_hat_gradient(shape: BeamShape, cfg: DesignConfig, cache: MseObjectiveCache | None = None) -> np.ndarray:
    """Analytic gradient of :func:`mse_hat` with respect to the phases."""
    cache = cache or MseObjectiveCache(cfg)
    c = _coefficient(cfg)
    G, Q = cfg.grid_G, cfg.Q
    w = np.exp(1j * shape.phases)
    axis_g = cache.axis_gains(shape.phases)
    g = cache.gains(axis_g)
    K = cache.dist2 * np.exp(-c * _gain_distance(g))
    # u_m(p) = conj(g_m(p)) sum_p' K_pp' - sum_p' K_pp' conj(g_m(p'))
    u = np.conj(g) * K.sum(axis=1) - np.conj(g) @ K.T
    # d axis_gain_j(a_k) / d rho_i = j conj_steer[k, i] w_i ramp[j, i] / Q
    dA = 1j * cache.conj_steer[None, :, :] * (cache.ramps * w)[:, None, :] / Q
    grad = np.zeros(Q)
    for idx, (j1, j2) in enumerate(cache.pairs):
        um = u[idx].reshape(G, G)
        left = um @ axis_g[j2]  # sum over the axis-2 index
        right = axis_g[j1] @ um  # sum over the axis-1 index
        grad += np.real(left @ dA[j1] + right @ dA[j2])
    return -4.0 * c * grad * _norm(cfg)


def default_design_snr(init: BeamShape, cfg: DesignConfig) -> float:
    """SNR at which the central codeword's kernel at the coverage edge is ``e^-1``."""
    cache = MseObjectiveCache(replace_snr(cfg, 1.0))
    kd = 2.0 * np.pi * cfg.spacing_wl
    offsets = element_offsets(cfg.Q)
    w = init.vector

    def g(a1, a2):
        s1 = np.exp(-1j * kd * a1 * offsets)
        s2 = np.exp(-1j * kd * a2 * offsets)
        ramp = cache.ramps[cfg.gamma]
        return (s1 @ (w * ramp)) * (s2 @ (w * ramp)) / cfg.Q**2

    diff = abs(g(0.0, 0.0) - g(cfg.width / 2, 0.0)) ** 2
    return float(1.0 / diff) if diff > 0 else 1.0


def replace_snr(cfg: DesignConfig, snr: float) -> DesignConfig:
    d = asdict(cfg)
    d["design_snr"] = snr
    return DesignConfig(**d)


@dataclass
class DesignResult:
    shape: BeamShape
    converged: bool
    iterations: int
    objective: float
    initial_objective: float
    last_step_norm: float
    stop_reason: str
    history: list = field(default_factory=list)

    def report(self, cfg: DesignConfig) -> dict:
        return {
            "config": asdict(cfg),
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "initial_objective": self.initial_objective,
            "final_objective": self.objective,
            "last_step_norm": self.last_step_norm,
            "stop_tol": cfg.stop_tol,
        }


def optimize_beam_shape(init: BeamShape, cfg: DesignConfig) -> DesignResult:
    """Gradient descent ``rho <- rho - w^l zeta grad`` with halving backtracking.

    The step ``zeta`` defaults to a value giving a largest initial phase
    update of 0.1 rad. A step that does not decrease the objective is halved
    (and the reduction kept) until it does. Iteration stops once
    ``|w^l zeta grad| < stop_tol``.
    """
    if cfg.design_snr is None:
        cfg = replace_snr(cfg, default_design_snr(init, cfg))
    cache = MseObjectiveCache(cfg)
    rho = init.phases.copy()
    f = mse_hat(BeamShape(rho), cfg, cache)
    f0 = f
    history = [f]
    grad = mse_hat_gradient(BeamShape(rho), cfg, cache)
    gmax = float(np.max(np.abs(grad)))
    zeta = cfg.step if cfg.step is not None else (0.1 / gmax if gmax > 0 else 1.0)
    step_norm = float(zeta * np.linalg.norm(grad))
    for it in range(cfg.max_iter):
        scale = cfg.decay**it * zeta
        step_norm = float(scale * np.linalg.norm(grad))
        if step_norm < cfg.stop_tol:
            return DesignResult(BeamShape(rho, init.unit_gain), True, it, f, f0, step_norm, "step_below_tol", history)
        while True:
            cand = rho - scale * grad
            fc = mse_hat(BeamShape(cand), cfg, cache)
            if fc <= f:
                break
            zeta *= 0.5
            scale *= 0.5
            step_norm = float(scale * np.linalg.norm(grad))
            if step_norm < cfg.stop_tol:
                return DesignResult(BeamShape(rho, init.unit_gain), True, it, f, f0, step_norm, "step_below_tol", history)
        rho, f = cand, fc
        history.append(f)
        grad = mse_hat_gradient(BeamShape(rho), cfg, cache)
    return DesignResult(BeamShape(rho, init.unit_gain), False, cfg.max_iter, f, f0, step_norm, "max_iterations", history)


def write_report(path, result: DesignResult, cfg: DesignConfig, extra: dict | None = None) -> None:
    data = result.report(cfg)
    data.update(extra or {})
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
