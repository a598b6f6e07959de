import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from irstrack.channel import complex_noise
from irstrack.codebook import Codeword, make_codebook
from irstrack.estimation import (
    DegenerateSpectrumWarning,
    MeasurementSet,
    adjacent_codeword_set,
    build_hypothesis_grid,
    export_surface_csv,
    log_likelihood,
    music_covariance,
    music_estimate,
    music_spectrum,
    peak_ml_estimate,
    xi_tilde,
)

CB = make_codebook("quadratic", 8, 9, 0.5, 1.0)
M0 = Codeword(4, 4)


def measurements(index, grid, xi=0.7 - 0.4j, noise=0.0, N=5, seed=0, P=1.0, cb=CB):
    cws = adjacent_codeword_set(M0, 1, cb.M)
    g = cb.gain_matrix(cws, grid.a1[[index]], grid.a2[[index]])[:, 0]
    s = np.full(N, np.sqrt(P), dtype=complex)
    r = g[:, None] * xi * s
    if noise:
        r = r + complex_noise(np.random.default_rng(seed), r.shape, noise)
    return MeasurementSet(cws, r, s), g


def test_adjacent_set_examples():
    assert adjacent_codeword_set(Codeword(3, 3), 0, 9) == [Codeword(3, 3)]
    assert len(adjacent_codeword_set(Codeword(3, 3), 1, 9)) == 9
    assert sorted(adjacent_codeword_set(Codeword(0, 0), 1, 9)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    with pytest.raises(IndexError):
        adjacent_codeword_set(Codeword(9, 0), 1, 9)


def test_grid_corners_and_spacing():
    g2 = build_hypothesis_grid(M0, CB, 2)
    c1, c2 = g2.center_factors
    R = 3 * 2 / CB.M
    assert sorted(zip(g2.a1 - c1, g2.a2 - c2)) == pytest.approx(
        sorted([(-R / 2, -R / 2), (-R / 2, R / 2), (R / 2, -R / 2), (R / 2, R / 2)]))
    g10 = build_hypothesis_grid(M0, CB, 10)
    np.testing.assert_allclose(np.diff(np.unique(g10.a1)), R / 9)
    assert len(g10) == 100


@pytest.mark.parametrize("H", [2, 3, 4, 5, 10, 11])
def test_grid_center_included_iff_odd(H):
    g = build_hypothesis_grid(M0, CB, H)
    c1, c2 = g.center_factors
    hit = np.any((np.abs(g.a1 - c1) < 1e-12) & (np.abs(g.a2 - c2) < 1e-12))
    assert hit == (H % 2 == 1)


def test_grid_requires_two_points():
    with pytest.raises(ValueError):
        build_hypothesis_grid(M0, CB, 1)


def test_xi_tilde_noiseless_identity():
    grid = build_hypothesis_grid(M0, CB, 5)
    ms, g = measurements(7, grid, xi=1.3 + 0.2j, P=2.0)
    assert xi_tilde(ms, g, 2.0) == pytest.approx(1.3 + 0.2j, rel=1e-12)
    assert xi_tilde(ms, dict(zip(ms.codewords, g)), 2.0) == pytest.approx(1.3 + 0.2j, rel=1e-12)


def test_xi_tilde_zero_gains():
    grid = build_hypothesis_grid(M0, CB, 5)
    ms, g = measurements(7, grid)
    with pytest.raises(ZeroDivisionError):
        xi_tilde(ms, np.zeros_like(g), 1.0)


def test_xi_tilde_matches_numeric_maximum():
    grid = build_hypothesis_grid(M0, CB, 6)
    rng = np.random.default_rng(4)
    for k in range(20):
        ms, _ = measurements(int(rng.integers(len(grid))), grid, noise=50.0, seed=k)
        gains = CB.gain_matrix(ms.codewords, grid.a1[[k]], grid.a2[[k]])[:, 0]
        closed = xi_tilde(ms, gains, 1.0)
        res = minimize(lambda v: -log_likelihood(ms, gains, v[0] + 1j * v[1]), [0.0, 0.0], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        assert abs(res.x[0] + 1j * res.x[1] - closed) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-3.0, 3.0), st.integers(0, 24))
def test_xi_tilde_linear_in_samples(mag, ang, idx):
    grid = build_hypothesis_grid(M0, CB, 5)
    ms, g = measurements(idx, grid, noise=1.0, seed=idx)
    c = mag * np.exp(1j * ang)
    scaled = MeasurementSet(ms.codewords, c * ms.samples, ms.pilot)
    assert xi_tilde(scaled, g, 1.0) == pytest.approx(c * xi_tilde(ms, g, 1.0), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 48), st.integers(0, 1000))
def test_profile_likelihood_dominance(idx, seed):
    grid = build_hypothesis_grid(M0, CB, 7)
    ms, _ = measurements(idx, grid, noise=10.0, seed=seed)
    rng = np.random.default_rng(seed)
    j = int(rng.integers(len(grid)))
    g = CB.gain_matrix(ms.codewords, grid.a1[[j]], grid.a2[[j]])[:, 0]
    best = log_likelihood(ms, g, xi_tilde(ms, g, 1.0))
    for xi in rng.normal(size=100) + 1j * rng.normal(size=100):
        assert best >= log_likelihood(ms, g, xi) - 1e-9 * abs(best)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 99))
def test_noiseless_ml_recovers_grid_point(idx):
    grid = build_hypothesis_grid(M0, CB, 10)
    ms, _ = measurements(idx, grid)
    est, surface = peak_ml_estimate(ms, grid, CB, 1.0)
    assert est == grid.direction(idx)
    assert surface.shape == (100,)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 99), st.integers(0, 10_000))
def test_estimate_always_on_grid(idx, seed):
    grid = build_hypothesis_grid(M0, CB, 10)
    ms, _ = measurements(idx, grid, noise=1e3, seed=seed)
    est, _ = peak_ml_estimate(ms, grid, CB, 1.0)
    assert any(est == grid.direction(i) for i in range(len(grid)))


def test_ml_tie_break_smallest_index():
    grid = build_hypothesis_grid(M0, CB, 4)
    cws = adjacent_codeword_set(M0, 1, CB.M)
    ms = MeasurementSet(cws, np.zeros((9, 3)), np.ones(3))
    est, surface = peak_ml_estimate(ms, grid, CB, 1.0)
    assert np.all(surface == 0)
    assert est == grid.direction(0)


def test_surface_export(tmp_path):
    grid = build_hypothesis_grid(M0, CB, 3)
    ms, _ = measurements(4, grid)
    _, surface = peak_ml_estimate(ms, grid, CB, 1.0)
    path = tmp_path / "s.csv"
    export_surface_csv(path, grid, surface)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta,phi,loglik"
    assert len(lines) == 10


def test_music_covariance_properties():
    grid = build_hypothesis_grid(M0, CB, 5)
    ms, g = measurements(3, grid, noise=5.0)
    S = music_covariance(ms)
    np.testing.assert_allclose(S, S.conj().T)
    assert np.linalg.eigvalsh(S).min() > -1e-9
    single = MeasurementSet(ms.codewords, ms.samples[:, :1], ms.pilot[:1])
    assert np.linalg.matrix_rank(music_covariance(single), tol=1e-9 * np.abs(ms.samples).max() ** 2) == 1


def test_music_noiseless_principal_vector():
    grid = build_hypothesis_grid(M0, CB, 5)
    ms, g = measurements(3, grid)
    S = music_covariance(ms)
    vals, vecs = np.linalg.eigh(S)
    assert vals[-2] < 1e-10 * vals[-1]
    u = vecs[:, -1]
    assert abs(np.vdot(u, g)) / np.linalg.norm(g) == pytest.approx(1.0, abs=1e-10)


def test_music_requires_constant_pilot():
    ms = MeasurementSet([(0, 0), (0, 1)], np.ones((2, 2)), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        music_covariance(ms)


@pytest.mark.parametrize("idx", [0, 12, 24, 17])
def test_music_noiseless_exact(idx):
    grid = build_hypothesis_grid(M0, CB, 5)
    ms, _ = measurements(idx, grid)
    assert music_estimate(music_covariance(ms), ms, grid, CB, 1.0) == grid.direction(idx)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3.1, 3.1), st.integers(0, 24))
def test_music_rotation_invariance(ang, idx):
    grid = build_hypothesis_grid(M0, CB, 5)
    ms, _ = measurements(idx, grid, noise=0.5, seed=idx)
    rot = MeasurementSet(ms.codewords, np.exp(1j * ang) * ms.samples, ms.pilot)
    a = np.argmax(music_spectrum(music_covariance(ms), ms, grid, CB, 1.0))
    b = np.argmax(music_spectrum(music_covariance(rot), rot, grid, CB, 1.0))
    assert a == b


def test_music_flat_spectrum_warns():
    grid = build_hypothesis_grid(M0, CB, 3)
    ms, _ = measurements(4, grid)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        music_spectrum(np.eye(9), ms, grid, CB, 1.0)
    assert any(issubclass(w.category, DegenerateSpectrumWarning) for w in rec)


def test_measurement_set_shape_check():
    with pytest.raises(ValueError):
        MeasurementSet([(0, 0)], np.ones((1, 3)), np.ones(2))
