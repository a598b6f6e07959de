import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irstrack.codebook import Codeword, make_codebook
from irstrack.geometry import Direction
from irstrack.tracking import (
    OBSERVATION,
    EstimateHistory,
    KalmanState,
    TrajectoryModel,
    extrapolate,
    fit_polynomial,
    kalman_init,
    kalman_predict,
    kalman_update,
    nearest_codeword,
    select_dt_codeword,
    select_ide_codeword,
)


def history(ts, values, cap=None):
    h = EstimateHistory(cap or len(ts))
    for t, v in zip(ts, values):
        h.append(t, v)
    return h


def test_fit_exact_line():
    model = fit_polynomial(history([0, 1, 2], [(0, 0), (1, 0), (2, 0)]), 1)
    for t in (0.0, 0.5, 3.7):
        assert extrapolate(model, t).theta == pytest.approx(t)
    # coefficients are relative to the newest estimate
    np.testing.assert_allclose(model.coefficients[0], [2.0, 1.0])


def test_fit_degree_zero_is_mean():
    model = fit_polynomial(history([0, 1, 4], [(0.1, -0.2), (0.3, 0.0), (0.8, 0.5)]), 0)
    np.testing.assert_allclose(model.coefficients[:, 0], [0.4, 0.1])


def test_underdetermined_fit_reduces_degree():
    model = fit_polynomial(history([1.5], [(0.2, 0.1)]), 1)
    assert model.effective_degree == 0
    assert extrapolate(model, 10.0) == pytest.approx((0.2, 0.1))


def test_history_capacity_and_order():
    h = history([0, 1, 2, 3], [(i, i) for i in range(4)], cap=3)
    assert len(h) == 3
    np.testing.assert_array_equal(h.times, [1, 2, 3])
    with pytest.raises(ValueError):
        h.append(3, (0, 0))
    with pytest.raises(ValueError):
        EstimateHistory(0)


def test_extrapolate_example():
    model = TrajectoryModel(np.array([[0.0, 1.0], [0.0, -1.0]]), 1)
    assert extrapolate(model, 0.5) == pytest.approx((0.5, -0.5))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 3), st.data())
def test_polynomial_truth_reproduced(n, data):
    coef = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=2 * (n + 1), max_size=2 * (n + 1)))).reshape(2, n + 1)
    S = n + 1 + data.draw(st.integers(0, 3))
    t0 = data.draw(st.floats(0, 100))
    ts = t0 + 1.5 * np.arange(S)
    truth = np.array([[np.polyval(c[::-1], (t - t0) / 10) for c in coef] for t in ts])
    model = fit_polynomial(history(ts, truth), n)
    t_new = ts[-1] + 1.5
    expected = [np.polyval(c[::-1], (t_new - t0) / 10) for c in coef]
    assert extrapolate(model, t_new) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=6), st.integers(1, 2))
def test_normal_equation_residual(vals, n):
    ts = 1.5 * np.arange(len(vals))
    y = np.column_stack([vals, vals[::-1]])
    model = fit_polynomial(history(ts, y), n)
    V = np.vander(ts - ts[-1], n + 1, increasing=True)
    grad = V.T @ (V @ model.coefficients.T - y)
    assert np.abs(grad).max() < 1e-8


def test_codeword_selection_at_main_lobe():
    cb = make_codebook("quadratic", 10, 12, 0.5, 1.0)
    for m in [Codeword(0, 0), Codeword(5, 7), Codeword(11, 3)]:
        assert nearest_codeword(Direction(*cb.main_lobes[m]), cb) == m


def test_codeword_selection_tie_break():
    cb = make_codebook("linear", 10, 20, 0.5, 1.0)
    mid = 0.5 * (cb.main_lobes[9, 10] + cb.main_lobes[10, 10])
    assert nearest_codeword(Direction(*mid), cb) == Codeword(9, 10)


def test_linear_broadside_selection():
    cb = make_codebook("linear", 10, 20, 0.5, 1.0)
    model = TrajectoryModel(np.zeros((2, 2)), 1)
    assert select_dt_codeword(model, 3.0, cb) == Codeword(10, 10)
    assert select_ide_codeword(model, 4.5, cb) == Codeword(10, 10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0.1, 10.0))
def test_selection_scale_invariance(theta, phi, c):
    cb = make_codebook("quadratic", 10, 12, 0.5, 1.0)
    d = np.array([theta, phi])
    dist = np.sum((cb.main_lobes - d) ** 2, axis=-1)
    assert np.unravel_index(np.argmin(c * dist), dist.shape) == tuple(nearest_codeword(d, cb))


def test_kalman_predict_example():
    s = KalmanState(np.array([0.1, 0.01, 0.2, -0.02]), np.eye(4), np.zeros((4, 4)), np.zeros((2, 2)), 1.5)
    np.testing.assert_allclose(kalman_predict(s).x, [0.115, 0.01, 0.17, -0.02])


def test_kalman_gain_example():
    s = KalmanState(np.zeros(4), np.eye(4), np.zeros((4, 4)), np.eye(2), 1.5)
    out = kalman_update(s, (1.0, -2.0))
    # K = 0.5 on the observed rows, 0 elsewhere
    np.testing.assert_allclose(out.x, [0.5, 0.0, -1.0, 0.0])
    assert np.trace(out.P) <= np.trace(s.P)


def test_kalman_perfect_measurement():
    s = kalman_predict(kalman_init((0.1, 0.2), 1.5))
    out = kalman_update(s, (0.3, -0.1))
    assert out.direction == pytest.approx((0.3, -0.1), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(1e-4, 1.0), st.lists(st.floats(-1, 1), min_size=2, max_size=20))
def test_kalman_covariance_stays_psd(q, r, zs):
    s = kalman_init((zs[0], -zs[0]), 1.5, q, r)
    for z in zs[1:]:
        prior = kalman_predict(s)
        s = kalman_update(prior, (z, 0.5 * z))
        np.testing.assert_allclose(s.P, s.P.T)
        assert np.linalg.eigvalsh(s.P).min() >= -1e-10
        assert np.trace(OBSERVATION @ s.P @ OBSERVATION.T) <= np.trace(OBSERVATION @ prior.P @ OBSERVATION.T) + 1e-12


def test_model_matched_trackers_are_exact():
    # two estimates pin a line; the filter also needs one update after init
    # before its zero-mean velocity prior is fully overridden
    T = 1.5
    w = np.array([0.004, -0.003])

    def truth(t):
        return np.array([0.05, 0.1]) + w * t

    kf = kalman_init(truth(0.0), T)
    h = history([0.0], [truth(0.0)], cap=3)
    for k in range(1, 12):
        t = k * T
        kf = kalman_predict(kf)
        if k >= 2:
            model = fit_polynomial(h, 1)
            assert np.max(np.abs(np.array(extrapolate(model, t)) - truth(t))) < 1e-9
        if k >= 3:
            assert np.max(np.abs(np.array(kf.direction) - truth(t))) < 1e-9
        kf = kalman_update(kf, truth(t))
        h.append(t, truth(t))
