import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import bessel_series
from junctionbie.numerics import (SingularMatrixError, bessel_j0_j1, circulant_from_symbol, dense_solve,
                                  eigenvalues, gmres, hankel_h0_h1, trig_coefficients, trig_samples)


def test_hankel_against_series():
    j0, y0 = bessel_series(0, 1.0)
    j1, y1 = bessel_series(1, 1.0)
    h0, h1 = hankel_h0_h1(1.0)
    assert abs(h0 - (j0 + 1j * y0)) < 1e-12
    assert abs(h1 - (j1 + 1j * y1)) < 1e-12


@pytest.mark.parametrize("x", [0.5, 5.0, 50.0])
def test_wronskian(x):
    h0, h1 = hankel_h0_h1(x)
    j0, j1 = h0.real, h1.real
    y0, y1 = h0.imag, h1.imag
    assert abs(j1 * y0 - j0 * y1 - 2 / (np.pi * x)) < 1e-12


def test_complex_wronskian_on_log_grid():
    for x in np.logspace(-2, 2, 25):
        z = x + 0.3j
        h0, h1 = hankel_h0_h1(z)
        j0, j1 = bessel_j0_j1(z)
        y0, y1 = (h0 - j0) / 1j, (h1 - j1) / 1j
        assert abs(j1 * y0 - j0 * y1 - 2 / (np.pi * z)) < 1e-11 * max(1, abs(2 / (np.pi * z)))


def test_hankel_decays_into_upper_half_plane():
    vals = np.abs(hankel_h0_h1(1.0 + 1j * np.linspace(0, 2, 21))[0])
    assert np.all(np.diff(vals) < 0)


def test_trig_single_mode():
    t = 2 * np.pi * np.arange(16) / 16
    c = trig_coefficients(np.exp(3j * t))
    expected = np.zeros(16, complex)
    expected[3 + 8] = 1
    assert np.allclose(c, expected, atol=1e-14)


@given(arrays(np.float64, 32, elements=st.floats(-1e3, 1e3)))
@settings(max_examples=50, deadline=None)
def test_trig_round_trip_and_parseval(x):
    c = trig_coefficients(x)
    assert np.abs(trig_samples(c) - x).max() <= 1e-13 * max(1.0, np.abs(x).max())
    assert np.sum(np.abs(x) ** 2) == pytest.approx(32 * np.sum(np.abs(c) ** 2), rel=1e-12, abs=1e-12)


def test_odd_length_rejected():
    with pytest.raises(ValueError):
        trig_coefficients(np.ones(7))


def test_circulant_diagonalised_by_fft():
    sym = np.arange(8.0) + 1j
    m = circulant_from_symbol(sym)
    for k in range(8):
        v = np.exp(2j * np.pi * k * np.arange(8) / 8)
        assert np.allclose(m @ v, sym[k] * v)


def test_gmres_identity_one_iteration():
    rep = gmres(np.eye(10), np.arange(10.0) + 1)
    assert rep.iterations == 1 and rep.converged


def test_gmres_matches_direct_solve():
    rng = np.random.default_rng(1)
    a = np.eye(50) * 4 + rng.standard_normal((50, 50)) / 7 + 1j * rng.standard_normal((50, 50)) / 7
    b = rng.standard_normal(50) + 0j
    rep = gmres(a, b, tol=1e-12)
    assert np.abs(rep.solution - np.linalg.solve(a, b)).max() < 1e-8
    assert all(x >= y - 1e-15 for x, y in zip(rep.history, rep.history[1:]))


def test_gmres_reports_non_convergence():
    a = np.diag(np.linspace(1, 100, 60))
    rep = gmres(a, np.ones(60), tol=1e-12, maxit=3)
    assert not rep.converged and rep.iterations == 3


def test_dense_solve_singular():
    with pytest.raises(SingularMatrixError):
        dense_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_eigenvalue_examples():
    assert np.allclose(sorted(eigenvalues(np.diag([3.0, 1.0, 2.0]))), [1, 2, 3])
    assert np.allclose(sorted(eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]])).real), [-1, 1])
    comp = np.array([[2.0, -2.0], [1.0, 0.0]])
    roots = np.roots([1, -2, 2])
    assert np.allclose(sorted(eigenvalues(comp), key=np.imag), sorted(roots, key=np.imag))
