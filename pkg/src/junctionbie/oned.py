"""One-dimensional piecewise-constant Helmholtz problem split into intervals:
closed-form Robin-to-Robin maps, the global interface system, a DtN variant,
the sweeping preconditioner and an exact transfer-matrix solution.

Interval j covers ``[a_j, a_{j+1}]``. Interval 0 carries ``u(a_0) = A`` and
the last interval ``u(b) = B``. Unknowns are ordered interface by interface,
``[f_{0,1}, f_{1,0}, f_{1,2}, f_{2,1}, ...]``, where ``f_{j,l}`` is the datum
received by interval j from its neighbour l.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .numerics import GmresReport, gmres

ONED_VARIANTS = ("classical", "dtn", "sweep_precond")


class ResonanceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OneDProblem:
    breakpoints: np.ndarray
    wavenumbers: np.ndarray
    eta: float = 1.0
    left: complex = 1.0
    right: complex = 0.0

    def __post_init__(self):
        a = np.asarray(self.breakpoints, float)
        k = np.asarray(self.wavenumbers, float)
        if a.ndim != 1 or len(a) < 2:
            raise ValueError("need at least one interval")
        if np.any(np.diff(a) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(k) != len(a) - 1:
            raise ValueError("one wavenumber per interval")
        if np.any(k <= 0):
            raise ValueError("wavenumbers must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        object.__setattr__(self, "breakpoints", a)
        object.__setattr__(self, "wavenumbers", k)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def n_intervals(self) -> int:
        return len(self.wavenumbers)

    @property
    def n_unknowns(self) -> int:
        return 2 * (self.n_intervals - 1)


def fig_eig_preset() -> OneDProblem:
    """k = 1, 2, 4, 8 on the quarters of [0, 1], cut into 20/40/80/160 pieces, eta = 1."""
    pieces = [20, 40, 80, 160]
    ks = [1.0, 2.0, 4.0, 8.0]
    pts = [np.linspace(q / 4, (q + 1) / 4, m + 1)[:-1] for q, m in enumerate(pieces)]
    a = np.concatenate(pts + [np.array([1.0])])
    k = np.concatenate([np.full(m, kq) for m, kq in zip(pieces, ks)])
    return OneDProblem(a, k, eta=1.0, left=1.0, right=0.0)


# ---------------------------------------------------------------- local maps

def _check(den, what):
    if abs(den) < 1e-13:
        raise ResonanceError(f"{what}: degenerate Robin problem (resonant denominator)")


def interval_map(k, h, p_left, p_right, q_left, q_right) -> np.ndarray:
    """2x2 map from incoming data ``(-u' + p_L u)(left), (u' + p_R u)(right)``
    to outgoing data ``(u' + q_L u)(left), (-u' + q_R u)(right)``.

    Obtained by writing ``u = alpha e^{ik(x-a)} + beta e^{-ik(x-a)}``.
    """
    e = np.exp(1j * k * h)
    ik = 1j * k
    m = np.array([[p_left - ik, p_left + ik],
                  [e * (p_right + ik), (p_right - ik) / e]])
    o = np.array([[q_left + ik, q_left - ik],
                  [e * (q_right - ik), (q_right + ik) / e]])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    _check(det, "interval map")
    minv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    return o @ minv


def end_map(k, h, p, q):
    """Dirichlet end interval: incoming ``(u' + p u)`` at the free end, outgoing
    ``(-u' + q u)`` there. Returns ``(S, gamma)`` with out = S f + gamma * A."""
    e = np.exp(1j * k * h)
    ik = 1j * k
    m = np.array([[1.0, 1.0], [e * (p + ik), (p - ik) / e]])
    o = np.array([e * (q - ik), (q + ik) / e])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    _check(det, "end map")
    row = o @ (np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det)
    return row[1], row[0]


@dataclass(frozen=True)
class RtR1D:
    s11: complex
    s12: complex
    s21: complex
    s22: complex

    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s21, self.s22]])


def rtr_1d(k: float, eta: float, h: float) -> RtR1D:
    """Classical interior map in closed form."""
    if min(k, eta, h) <= 0:
        raise ValueError("k, eta and h must be positive")
    e = np.exp(1j * k * h)
    den = (k + eta) ** 2 * e - (k - eta) ** 2 / e
    _check(den, "rtr_1d")
    diag = (eta ** 2 - k ** 2) * (e - 1 / e) / den
    off = 4 * k * eta / den
    return RtR1D(diag, off, off, diag)


def end_rtr_1d(k: float, eta: float, h: float):
    """Closed-form ``(S, gamma)`` of a Dirichlet end interval with classical data."""
    e = np.exp(1j * k * h)
    den = (k + eta) * e - (eta - k) / e
    _check(den, "end_rtr_1d")
    return ((eta - k) * e - (eta + k) / e) / den, 4j * k * eta / den


def dtn_1d(k: float, h: float) -> float:
    """``-v'(a)/v(a)`` for ``v(a + h) = 0``; same value at the other end by symmetry."""
    s = np.sin(k * h)
    if abs(s) < 1e-12:
        raise ResonanceError(f"k*h = {k * h} is a Dirichlet resonance of the interval")
    return k * np.cos(k * h) / s


def dtn_1d_exponential(k: float, h: float) -> complex:
    e = np.exp(1j * k * h)
    return -1j * k * (e + 1 / e) / (1 / e - e)


# ---------------------------------------------------------------- global system

@dataclass
class OneDSystem:
    problem: OneDProblem
    variant: str
    matrix: np.ndarray
    rhs: np.ndarray
    maps: list
    impedances: tuple

    @property
    def size(self) -> int:
        return self.rhs.shape[0]

    def coupling(self) -> np.ndarray:
        return self.matrix - np.eye(self.size)


def _impedances(pb: OneDProblem, variant: str):
    """Per-interval (incoming left, incoming right, outgoing left, outgoing right)."""
    n = pb.n_intervals
    if variant == "classical":
        z = 1j * pb.eta
        return [(z, z, z, z)] * n
    own = [dtn_1d(k, h) for k, h in zip(pb.wavenumbers, pb.lengths)]
    out = []
    for j in range(n):
        p_l = own[j - 1] if j > 0 else np.nan
        p_r = own[j + 1] if j < n - 1 else np.nan
        out.append((p_l, p_r, own[j], own[j]))
    return out


def assemble_1d(pb: OneDProblem, variant: str = "classical") -> OneDSystem:
    if variant not in ONED_VARIANTS:
        raise ValueError(f"unknown 1D variant {variant!r}")
    if pb.n_intervals < 2:
        raise ValueError("the interface system needs at least two intervals")
    base = "classical" if variant == "classical" else "dtn"
    imp = _impedances(pb, base)
    n = pb.n_intervals
    size = pb.n_unknowns
    k, h = pb.wavenumbers, pb.lengths
    mat = np.eye(size, dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    maps = []
    # left end: outgoing at a_1 feeds f_{1,0} (position 1)
    s0, g0 = end_map(k[0], h[0], imp[0][1], imp[0][3])
    maps.append((s0, g0))
    mat[1, 0] -= s0
    rhs[1] += g0 * pb.left
    for j in range(1, n - 1):
        sj = interval_map(k[j], h[j], *imp[j])
        maps.append(sj)
        left_in, right_in = 2 * j - 1, 2 * j           # f_{j,j-1}, f_{j,j+1}
        left_out, right_out = 2 * (j - 1), 2 * j + 1   # f_{j-1,j}, f_{j+1,j}
        mat[left_out, left_in] -= sj[0, 0]
        mat[left_out, right_in] -= sj[0, 1]
        mat[right_out, left_in] -= sj[1, 0]
        mat[right_out, right_in] -= sj[1, 1]
    # right end mirrors the left one
    sn, gn = end_map(k[-1], h[-1], imp[-1][0], imp[-1][2])
    maps.append((sn, gn))
    mat[size - 2, size - 1] -= sn
    rhs[size - 2] += gn * pb.right
    if variant == "sweep_precond":
        mat = _sweep_part(pb, mat)
    return OneDSystem(pb, variant, mat, rhs, maps, tuple(imp))


def _sweep_part(pb: OneDProblem, mat: np.ndarray) -> np.ndarray:
    """Keep only transmission couplings: f_{j-1,j} <- f_{j,j+1} and f_{j+1,j} <- f_{j,j-1}."""
    size = mat.shape[0]
    keep = np.zeros_like(mat, dtype=bool)
    for j in range(1, pb.n_intervals - 1):
        keep[2 * (j - 1), 2 * j] = True
        keep[2 * j + 1, 2 * j - 1] = True
    out = np.eye(size, dtype=complex)
    out[keep] = mat[keep]
    return out


def sweep_matrix(system: OneDSystem) -> np.ndarray:
    """``I + A~``: the system with reflection and end couplings removed."""
    if system.variant == "sweep_precond":
        return system.matrix
    return _sweep_part(system.problem, system.matrix)


def sweep_inverse(system: OneDSystem) -> np.ndarray:
    """Explicit inverse of ``I + A~`` as the finite series sum (-A~)^m."""
    m = sweep_matrix(system)
    a = sp.csr_matrix(m - np.eye(m.shape[0]))
    total = np.eye(m.shape[0], dtype=complex)
    term = sp.identity(m.shape[0], dtype=complex, format="csr")
    for _ in range(m.shape[0]):
        term = -(a @ term)
        term.eliminate_zeros()
        if term.nnz == 0:
            break
        total += term.toarray()
    return total


def nilpotency_index(a: np.ndarray, tol: float = 1e-10) -> Optional[int]:
    """Smallest m with ||a^m|| <= tol, or None within the matrix size."""
    p = np.eye(a.shape[0], dtype=complex)
    for m in range(1, a.shape[0] + 1):
        p = p @ a
        if np.abs(p).max() <= tol:
            return m
    return None


# ---------------------------------------------------------------- exact oracle

def transfer_matrix_oracle(pb: OneDProblem, variant: str = "classical"):
    """Exact solution by propagating (u, u') across intervals.

    Returns (u at breakpoints, u' at breakpoints, interface data vector f in
    the layout of the chosen variant).
    """
    k, h = pb.wavenumbers, pb.lengths

    def step(kj, hj):
        c, s = np.cos(kj * hj), np.sin(kj * hj)
        return np.array([[c, s / kj], [-kj * s, c]])

    total = np.eye(2)
    for kj, hj in zip(k, h):
        total = step(kj, hj) @ total
    if abs(total[0, 1]) < 1e-13:
        raise ResonanceError("global Dirichlet problem is resonant")
    du0 = (pb.right - total[0, 0] * pb.left) / total[0, 1]
    states = [np.array([pb.left, du0], dtype=complex)]
    for kj, hj in zip(k, h):
        states.append(step(kj, hj) @ states[-1])
    u = np.array([s[0] for s in states])
    du = np.array([s[1] for s in states])
    imp = _impedances(pb, "classical" if variant == "classical" else "dtn")
    f = np.zeros(pb.n_unknowns, dtype=complex)
    for j in range(pb.n_intervals - 1):
        x = j + 1  # breakpoint between intervals j and j+1
        f[2 * j] = du[x] + imp[j][1] * u[x]            # f_{j,j+1}
        f[2 * j + 1] = -du[x] + imp[j + 1][0] * u[x]   # f_{j+1,j}
    return u, du, f


# ---------------------------------------------------------------- spectra and solves

def eigenvalues_1d(system: OneDSystem) -> np.ndarray:
    return np.linalg.eigvals(system.matrix)


def write_eigenvalues_csv(path, values, variant: str) -> None:
    with open(path, "w") as fh:
        fh.write("re,im,variant\n")
        for v in values:
            fh.write(f"{v.real!r},{v.imag!r},{variant}\n")


@dataclass
class PrecondComparison:
    plain: GmresReport
    preconditioned: GmresReport


def precond_solve(pb: OneDProblem, tol: float = 1e-4, maxit: int = 2000,
                  source: str = "dtn") -> PrecondComparison:
    """GMRES on the classical system with and without a sweep preconditioner.

    ``source`` picks whose transmission entries build the sweep: the DtN
    system (default) or the classical system itself.
    """
    classical = assemble_1d(pb, "classical")
    inv = sweep_inverse(assemble_1d(pb, "dtn") if source == "dtn" else classical)
    plain = gmres(classical.matrix, classical.rhs, tol=tol, maxit=maxit)
    pre = gmres(inv @ classical.matrix, inv @ classical.rhs, tol=tol, maxit=maxit)
    return PrecondComparison(plain, pre)
