"""Numerical substrate: Hankel functions, trigonometric interpolation,
dense linear algebra with conditioning checks, and a non-restarted GMRES.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import special

EULER_GAMMA = 0.57721566490153286061


class SingularMatrixError(ArithmeticError):
    """Raised when a dense matrix is numerically singular."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


# ---------------------------------------------------------------- special functions

def hankel_h0_h1(z):
    """Return (H0^(1)(z), H1^(1)(z)) for complex z with Im z >= 0, z != 0."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ZeroDivisionError("Hankel functions are singular at z = 0")
    return special.hankel1(0, z), special.hankel1(1, z)


def bessel_j0_j1(z):
    z = np.asarray(z, dtype=complex)
    if np.all(z.imag == 0):
        x = z.real
        return special.j0(x).astype(complex), special.j1(x).astype(complex)
    return special.jv(0, z), special.jv(1, z)


# ---------------------------------------------------------------- trigonometric tools

def _check_even(n: int) -> None:
    if n % 2:
        raise ValueError(f"trigonometric interpolation needs an even sample count, got {n}")


def trig_coefficients(samples):
    """Fourier coefficients of the trigonometric interpolant.

    Coefficient ``c[m + N//2]`` multiplies ``exp(i m t)`` for modes
    m = -N/2 .. N/2-1 on the grid t_j = 2*pi*j/N.
    """
    samples = np.asarray(samples, dtype=complex)
    n = samples.shape[0]
    _check_even(n)
    return np.fft.fftshift(np.fft.fft(samples, axis=0), axes=0) / n


def trig_samples(coefficients):
    """Inverse of :func:`trig_coefficients`."""
    coefficients = np.asarray(coefficients, dtype=complex)
    n = coefficients.shape[0]
    _check_even(n)
    return np.fft.ifft(np.fft.ifftshift(coefficients, axes=0), axis=0) * n


def trig_modes(n: int) -> np.ndarray:
    """Integer modes in FFT (unshifted) order."""
    _check_even(n)
    return np.fft.fftfreq(n, d=1.0 / n)


def circulant_from_symbol(symbol) -> np.ndarray:
    """Dense matrix of the Fourier multiplier with the given symbol (FFT order)."""
    symbol = np.asarray(symbol)
    n = symbol.shape[0]
    col = np.fft.ifft(symbol)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def differentiation_matrix(n: int) -> np.ndarray:
    """Spectral d/dt on n equispaced points of [0, 2*pi); Nyquist mode dropped."""
    m = trig_modes(n)
    symbol = 1j * m
    symbol[n // 2] = 0.0
    return circulant_from_symbol(symbol).real


def log_quadrature_weights(n: int) -> np.ndarray:
    """Kussmaul-Martensen weights R[i, j] with
    int_0^{2pi} log(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R[i, j] f(t_j)
    for equispaced nodes (any common shift).
    """
    m = trig_modes(n)
    symbol = np.zeros(n)
    nz = m != 0
    # log(4 sin^2(t/2)) = -sum_{m != 0} exp(i m t)/|m|; the Nyquist term
    # carries the same weight since exp(i n t / 2) is real on the grid
    symbol[nz] = -2.0 * np.pi / np.abs(m[nz])
    return circulant_from_symbol(symbol).real


# ---------------------------------------------------------------- dense linear algebra

def condition_number(a) -> float:
    return float(np.linalg.cond(a))


def dense_solve(a, b, cond_limit: float = 1e13):
    a = np.asarray(a)
    lu, piv = sla.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() == 0 or diag.max() / diag.min() > cond_limit:
        cond = condition_number(a)
        if not np.isfinite(cond) or cond > cond_limit:
            raise SingularMatrixError("matrix is numerically singular", cond)
    return sla.lu_solve((lu, piv), b, check_finite=False)


def dense_inverse(a, cond_limit: float = 1e13):
    a = np.asarray(a)
    return dense_solve(a, np.eye(a.shape[0], dtype=np.result_type(a, float)), cond_limit)


def eigenvalues(a):
    return np.linalg.eigvals(np.asarray(a))


def smallest_singular_value(a) -> float:
    return float(np.linalg.svd(np.asarray(a), compute_uv=False)[-1])


# ---------------------------------------------------------------- GMRES

@dataclass
class GmresReport:
    solution: np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)
    converged: bool = True

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,residual\n")
            for it, res in enumerate(self.history):
                fh.write(f"{it},{res:.16e}\n")


def as_operator(a):
    if callable(a):
        return a
    a = np.asarray(a)
    return lambda x: a @ x


def gmres(apply, rhs, tol: float = 1e-4, maxit: int = 2000, x0=None) -> GmresReport:
    """Non-restarted GMRES with modified Gram-Schmidt and Givens rotations.

    ``apply`` is a callable or a dense matrix. Residuals are relative to
    ``||rhs||``. Hitting ``maxit`` returns a report flagged non-converged.
    """
    apply = as_operator(apply)
    b = np.asarray(rhs, dtype=complex)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    x = np.zeros(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    if bnorm == 0:
        return GmresReport(np.zeros(n, dtype=complex), 0, 0.0, [0.0], True)
    r = b - apply(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history = [beta / bnorm]
    if history[0] <= tol:
        return GmresReport(x, 0, history[0], history, True)

    m = min(maxit, n)
    basis = np.zeros((m + 1, n), dtype=complex)
    hess = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m, dtype=complex)
    sn = np.zeros(m, dtype=complex)
    g = np.zeros(m + 1, dtype=complex)
    g[0] = beta
    basis[0] = r / beta
    k = 0
    for k in range(m):
        w = apply(basis[k])
        for i in range(k + 1):
            hess[i, k] = np.vdot(basis[i], w)
            w = w - hess[i, k] * basis[i]
        hess[k + 1, k] = np.linalg.norm(w)
        if hess[k + 1, k] != 0:
            basis[k + 1] = w / hess[k + 1, k]
        for i in range(k):
            tmp = np.conj(cs[i]) * hess[i, k] + np.conj(sn[i]) * hess[i + 1, k]
            hess[i + 1, k] = -sn[i] * hess[i, k] + cs[i] * hess[i + 1, k]
            hess[i, k] = tmp
        a_, b_ = hess[k, k], hess[k + 1, k]
        denom = np.sqrt(abs(a_) ** 2 + abs(b_) ** 2)
        if denom == 0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k] = a_ / denom
            sn[k] = b_ / denom
        hess[k, k] = np.conj(cs[k]) * a_ + np.conj(sn[k]) * b_
        hess[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = np.conj(cs[k]) * g[k]
        history.append(abs(g[k + 1]) / bnorm)
        if history[-1] <= tol or hess[k, k] == 0:
            break
    steps = k + 1
    y = sla.solve_triangular(hess[:steps, :steps], g[:steps])
    x = x + basis[:steps].T @ y
    res = history[-1]
    return GmresReport(x, steps, res, history, res <= tol)
