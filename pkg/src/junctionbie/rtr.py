"""Subdomain Robin solvers and Robin-to-Robin maps.

Robin data follow the weighted convention of the rest of the package:
``psi = eps^{-1} w du/dn + T u`` with ``w`` the node weight and ``T`` an
impedance operator mapping plain Dirichlet samples to weighted samples
(``T = i*eta`` for classical Robin data). The Dirichlet trace of the
subdomain solution is obtained from a regularized combined field equation
whose regularizer is the single layer at a complexified wavenumber.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bio import BioKind, OperatorCache
from .numerics import SingularMatrixError, circulant_from_symbol, dense_solve, trig_modes
from .scenario import Medium, Scenario

VARIANTS = ("classical", "dtn_blend", "sqrt_blend")

# fraction of each interface on which the cutoff is identically one
CUTOFF_PLATEAU = 0.70
DTN_SIGMA = 0.1


def regularizer_wavenumber(k: float) -> complex:
    """Complex wavenumber of the regularizing single layer."""
    return k + 1j * k ** (1.0 / 3.0)


@dataclass
class ImpedanceOperator:
    """Robin operator ``T`` on one subdomain boundary (plain -> weighted)."""

    variant: str
    subdomain: int
    matrix: np.ndarray

    def __matmul__(self, other):
        return self.matrix @ other

    def impedance(self, epsilon: float) -> np.ndarray:
        """``Z = eps * T`` as it enters the regularized equation."""
        return epsilon * self.matrix


@dataclass
class RobinSolver:
    """Dense realization of ``psi -> u|boundary`` for one subdomain."""

    subdomain: int
    medium: Medium
    impedance: ImpedanceOperator
    system: np.ndarray      # the regularized operator acting on u
    trace: np.ndarray       # psi -> u
    condition: float = float("nan")

    def solve(self, psi) -> np.ndarray:
        return self.trace @ psi

    def neumann(self, psi) -> np.ndarray:
        """``eps^{-1} w du/dn`` for Robin data psi."""
        return psi - self.impedance @ self.solve(psi)


@dataclass
class RtRBlocks:
    subdomain: int
    full: np.ndarray
    segments: dict
    solver: Optional[RobinSolver] = None

    def block(self, rows: int, cols: int) -> np.ndarray:
        """Rows on the interface with ``rows``, columns on the one with ``cols``."""
        return self.full[self.segments[rows], self.segments[cols]]

    def __matmul__(self, other):
        return self.full @ other


@dataclass
class DtnMap:
    subdomain: int
    wavenumber: complex
    matrix: np.ndarray
    active: Optional[int] = None


@dataclass
class _Cache:
    ops: OperatorCache = field(default_factory=OperatorCache)


_default_cache = _Cache()


def _ops(boundary, k, cache: Optional[OperatorCache]):
    cache = cache or _default_cache.ops
    return {kind: cache.matrix(boundary, k, kind) for kind in BioKind}, cache


def classical_impedance(boundary, eta: float) -> ImpedanceOperator:
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    return ImpedanceOperator("classical", boundary.index,
                             1j * eta * np.eye(boundary.size, dtype=complex))


def regularized_operator(boundary, medium: Medium, impedance: ImpedanceOperator,
                         cache: Optional[OperatorCache] = None, kappa=None):
    """Return (A, B) with ``A u = eps * B psi`` for the Robin problem."""
    ops, cache = _ops(boundary, medium.wavenumber, cache)
    kappa = regularizer_wavenumber(medium.wavenumber) if kappa is None else complex(kappa)
    if kappa.imag <= 0:
        raise ValueError("regularizer wavenumber needs a positive imaginary part")
    s_reg = cache.matrix(boundary, kappa, BioKind.S)
    s, k, kt, nn = ops[BioKind.S], ops[BioKind.K], ops[BioKind.KT], ops[BioKind.N]
    z = impedance.impedance(medium.epsilon)
    b = s + s_reg - 2 * s_reg @ kt
    a = 0.5 * np.eye(boundary.size) - 2 * s_reg @ nn + b @ z + k
    return a, b


def robin_solver(boundary, medium: Medium, impedance: ImpedanceOperator,
                 cache: Optional[OperatorCache] = None, kappa=None,
                 cond_limit: float = 1e10) -> RobinSolver:
    a, b = regularized_operator(boundary, medium, impedance, cache, kappa)
    try:
        trace = dense_solve(a, medium.epsilon * b, cond_limit=cond_limit)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"regularized Robin operator of subdomain {boundary.index} is singular",
            exc.condition) from None
    return RobinSolver(boundary.index, medium, impedance, a, trace)


def regularized_robin_solve(boundary, medium: Medium, impedance: ImpedanceOperator, psi,
                            cache: Optional[OperatorCache] = None) -> np.ndarray:
    """Dirichlet trace of the Robin problem with data ``psi``."""
    a, b = regularized_operator(boundary, medium, impedance, cache)
    return dense_solve(a, medium.epsilon * (b @ np.asarray(psi)))


def rtr_map(boundary, medium: Medium, impedance: ImpedanceOperator,
            cache: Optional[OperatorCache] = None, solver: Optional[RobinSolver] = None) -> RtRBlocks:
    """``psi -> eps^{-1} w du/dn - T u`` as a dense matrix, split by interface."""
    if solver is None:
        solver = robin_solver(boundary, medium, impedance, cache)
    full = np.eye(boundary.size) - 2 * impedance.matrix @ solver.trace
    return RtRBlocks(boundary.index, full, dict(boundary.segments), solver)


def dtn_map(boundary, medium: Medium, sigma: float = DTN_SIGMA, active: Optional[int] = None,
            cache: Optional[OperatorCache] = None) -> DtnMap:
    """Dirichlet-to-weighted-Neumann map at wavenumber ``k + i sigma``.

    With ``active`` set, the Dirichlet data vanish off the interface shared
    with that neighbour; the input is still indexed on the whole boundary.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    kc = medium.wavenumber + 1j * sigma
    cache = cache or _default_cache.ops
    s = cache.matrix(boundary, kc, BioKind.S)
    k = cache.matrix(boundary, kc, BioKind.K)
    rhs = 0.5 * np.eye(boundary.size) + k
    if active is not None:
        mask = np.zeros(boundary.size)
        mask[boundary.interface_slice(active)] = 1.0
        rhs = rhs * mask[None, :]
    try:
        y = dense_solve(s, rhs, cond_limit=1e10)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"single layer of subdomain {boundary.index} is singular at k={kc}; use sigma > 0",
            exc.condition) from None
    return DtnMap(boundary.index, kc, y, active)


def sqrt_symbol(n: int, k: float, sigma: float) -> np.ndarray:
    """``-sqrt(m^2 - (k + i sigma)^2) / 2`` in FFT order, imaginary part positive."""
    m = trig_modes(n)
    kc = k + 1j * sigma
    return -0.5 * np.sqrt(m ** 2 - kc ** 2 + 0j)


def sqrt_multiplier(boundary, k: float, sigma: float, density) -> np.ndarray:
    density = np.asarray(density, dtype=complex)
    n = density.shape[0]
    if n % 2:
        raise ValueError("sqrt_multiplier needs an even number of samples")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return np.fft.ifft(sqrt_symbol(n, k, sigma) * np.fft.fft(density))


def cutoff_profile(n: int, plateau: float = CUTOFF_PLATEAU) -> np.ndarray:
    """Smooth bump on the n nodes of one interface, one on the central plateau."""
    s = (np.arange(n) + 0.5) / n
    ramp = (1.0 - plateau) / 2
    t = np.clip(np.minimum(s, 1 - s) / ramp, 0.0, 1.0)

    def e(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    return e(t) / (e(t) + e(1.0 - t))


def cutoff(boundary, neighbor: int, plateau: float = CUTOFF_PLATEAU) -> np.ndarray:
    sl = boundary.interface_slice(neighbor)
    if len(boundary.arcs) == 1:
        # a closed interface has no junction to stay away from
        return np.ones(boundary.size)
    chi = np.zeros(boundary.size)
    chi[sl] = cutoff_profile(sl.stop - sl.start, plateau)
    return chi


def blended_impedance(geometry, scenario: Scenario, j: int, variant: str,
                      cache: Optional[OperatorCache] = None, plateau: float = CUTOFF_PLATEAU) -> ImpedanceOperator:
    """Impedance operator of subdomain j approximating its neighbours' DtN maps."""
    b = geometry.boundaries[j]
    if variant == "classical":
        return classical_impedance(b, scenario.coupling)
    mat = np.zeros((b.size, b.size), dtype=complex)
    media = scenario.media
    for nb in b.neighbors:
        if nb >= len(media):
            raise ValueError(f"no medium for neighbour {nb} of subdomain {j}")
        eps_nb, k_nb = media[nb].epsilon, media[nb].wavenumber
        if variant == "sqrt_blend":
            sigma = scenario.sigma_gsqr[nb]
            chi = cutoff(b, nb, plateau)
            ps = b.weight_ratio * circulant_from_symbol(sqrt_symbol(b.size, k_nb, sigma))
            mat += (-2.0 / eps_nb) * (chi[:, None] * ps * chi[None, :])
        elif variant == "dtn_blend":
            other = geometry.boundaries[nb]
            y = dtn_map(other, media[nb], scenario.sigma_dtnr, active=j, cache=cache).matrix
            rows_j, rows_nb = geometry.exchange.pairs[(j, nb)]
            mat[np.ix_(rows_j, rows_j)] += y[np.ix_(rows_nb, rows_nb)] / eps_nb
        else:
            raise ValueError(f"unknown impedance variant {variant!r}; expected one of {VARIANTS}")
    return ImpedanceOperator(variant, j, mat)
