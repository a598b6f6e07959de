"""Trajectory extrapolation, codeword selection and a Kalman baseline."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .codebook import Codebook, Codeword
from .geometry import Direction


class EstimateHistory:
    """Bounded buffer of ``(t, direction)`` estimates with increasing timestamps."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity)

    def append(self, t: float, d) -> None:
        if self._items and not t > self._items[-1][0]:
            raise ValueError(f"timestamps must increase strictly ({t} after {self._items[-1][0]})")
        self._items.append((float(t), Direction(float(d[0]), float(d[1]))))

    def __len__(self):
        return len(self._items)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self._items])

    @property
    def values(self) -> np.ndarray:
        return np.array([d for _, d in self._items]).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class TrajectoryModel:
    """Polynomials in ``t - fitted_at``; row 0 is theta, row 1 is phi, column i multiplies ``t^i``."""

    coefficients: np.ndarray
    degree: int
    fitted_at: float = 0.0
    effective_degree: int | None = None

    def __post_init__(self):
        B = np.asarray(self.coefficients, dtype=float)
        if B.shape != (2, self.degree + 1):
            raise ValueError(f"coefficients have shape {B.shape}, expected (2, {self.degree + 1})")
        if not np.all(np.isfinite(B)):
            raise ValueError("non-finite polynomial coefficients")
        object.__setattr__(self, "coefficients", B)
        if self.effective_degree is None:
            object.__setattr__(self, "effective_degree", self.degree)


def fit_polynomial(history: EstimateHistory, n: int) -> TrajectoryModel:
    """Least-squares polynomial of degree ``n`` through the stored estimates.

    Times are recentred at the newest estimate. With fewer than ``n + 1``
    estimates the degree drops to ``S - 1``; higher coefficients are zero.
    """
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    S = len(history)
    if S < 1:
        raise ValueError("cannot fit an empty history")
    t0 = history.times[-1]
    ts = history.times - t0
    y = history.values
    deg = min(n, S - 1)
    while True:
        V = np.vander(ts, deg + 1, increasing=True)
        moments = V.T @ V
        try:
            b = scipy.linalg.solve(moments, V.T @ y, assume_a="pos")
            break
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            if deg == 0:
                raise
            deg -= 1
    B = np.zeros((2, n + 1))
    B[:, : deg + 1] = b.T
    return TrajectoryModel(B, n, float(t0), deg)


def extrapolate(model: TrajectoryModel, t: float) -> Direction:
    x = t - model.fitted_at
    acc = np.zeros(2)
    for col in model.coefficients.T[::-1]:
        acc = acc * x + col
    return Direction(float(acc[0]), float(acc[1]))


def nearest_codeword(d, cb: Codebook) -> Codeword:
    """Codeword whose main lobe is closest to ``d``; ties go to the smallest ``(m1, m2)``."""
    dist = np.sum((cb.main_lobes - np.asarray(d, dtype=float)) ** 2, axis=-1)
    m1, m2 = np.unravel_index(int(np.argmin(dist)), dist.shape)
    return Codeword(int(m1), int(m2))


def select_dt_codeword(model: TrajectoryModel, t: float, cb: Codebook) -> Codeword:
    return nearest_codeword(extrapolate(model, t), cb)


def select_ide_codeword(model: TrajectoryModel, t_next: float, cb: Codebook) -> Codeword:
    return nearest_codeword(extrapolate(model, t_next), cb)


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Constant-velocity state ``[theta, dtheta, phi, dphi]``."""

    x: np.ndarray
    P: np.ndarray
    Q_proc: np.ndarray
    R_meas: np.ndarray
    T: float

    @property
    def direction(self) -> Direction:
        return Direction(float(self.x[0]), float(self.x[2]))


OBSERVATION = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])


def transition_matrix(T: float) -> np.ndarray:
    block = np.array([[1.0, T], [0.0, 1.0]])
    return np.kron(np.eye(2), block)


def kalman_init(z, T: float, q_var: float = 0.0, r_var: float = 0.0) -> KalmanState:
    """Filter started at the first estimate with zero velocity and unit covariance."""
    x = np.array([z[0], 0.0, z[1], 0.0], dtype=float)
    return KalmanState(x, np.eye(4), q_var * np.eye(4), r_var * np.eye(2), float(T))


def kalman_predict(state: KalmanState) -> KalmanState:
    F = transition_matrix(state.T)
    P = F @ state.P @ F.T + state.Q_proc
    return replace(state, x=F @ state.x, P=0.5 * (P + P.T))


def kalman_update(state: KalmanState, z) -> KalmanState:
    """Measurement update; the innovation covariance is pseudo-inverted so ``R = 0`` is allowed."""
    H = OBSERVATION
    S = H @ state.P @ H.T + state.R_meas
    K = state.P @ H.T @ np.linalg.pinv(S, hermitian=True)
    x = state.x + K @ (np.asarray(z, dtype=float) - H @ state.x)
    P = (np.eye(4) - K @ H) @ state.P
    return replace(state, x=x, P=0.5 * (P + P.T))
