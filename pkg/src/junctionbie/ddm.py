"""Non-overlapping domain decomposition with Robin (or generalized Robin)
transmission data, solved either by GMRES on the full interface system or by
eliminating the interior interfaces pairwise and iterating on the exterior
boundary only.

Unknowns are the incoming Robin data of every subdomain, split by
interface; the exterior subdomain keeps its data as one block. The global
system reads ``(I + A) f = g``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bio import OperatorCache, equispaced_angles, far_field_error
from .calculus import scattered_far_field
from .geometry import Geometry, build_geometry, five_subdomain_order
from .numerics import GmresReport, SingularMatrixError, dense_solve, gmres
from .rtr import RobinSolver, RtRBlocks, blended_impedance, robin_solver, rtr_map
from .scenario import Scenario, plane_wave_trace

# formulation tag -> impedance variant
IMPEDANCE_OF = {"classical": "classical", "dtnr": "dtn_blend", "gsqr": "sqrt_blend"}

EXTERIOR = (0, None)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, report: GmresReport):
        super().__init__(message)
        self.report = report


def default_layout(geometry: Geometry) -> list:
    """Interior interface pairs first, then exterior-adjacent data, then f0."""
    if geometry.kind == "five_subdomain_quadrants":
        return five_subdomain_order()
    inner, outer = [], []
    for b in geometry.boundaries[1:]:
        for nb in b.neighbors:
            (outer if nb == 0 else inner).append((b.index, nb))
    return inner + outer + [EXTERIOR]


def default_groups(geometry: Geometry) -> list:
    """Elimination schedule of interior-interface unknowns as (A, B) pairs."""
    if geometry.kind == "five_subdomain_quadrants":
        return [([(1, 2)], [(2, 1)]), ([(3, 4)], [(4, 3)]),
                ([(2, 3), (1, 4)], [(3, 2), (4, 1)])]
    seen, groups = set(), []
    for b in geometry.boundaries[1:]:
        for nb in b.neighbors:
            if nb != 0 and (nb, b.index) not in seen:
                seen.add((b.index, nb))
                groups.append(([(b.index, nb)], [(nb, b.index)]))
    return groups


@dataclass
class DdmSystem:
    scenario: Scenario
    geometry: Geometry
    variant: str
    solvers: list
    maps: list
    layout: list
    slices: dict
    positions: list          # global position of every node of each boundary
    blocks: list             # (rows, cols, matrix) off-identity couplings
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return self.rhs.shape[0]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x)
        y = x.astype(complex)
        for rows, cols, mat in self.blocks:
            y[rows] += mat @ x[cols]
        return y

    def dense(self) -> np.ndarray:
        m = np.eye(self.size, dtype=complex)
        for rows, cols, mat in self.blocks:
            m[np.ix_(rows, cols)] += mat
        return m

    def block(self, row_key, col_key) -> np.ndarray:
        """Dense block of ``I + A`` between two unknown pieces."""
        m = self.dense()
        return m[self.slices[row_key], self.slices[col_key]]

    def split(self, x) -> list:
        return [np.asarray(x)[pos] for pos in self.positions]


@dataclass
class DdmSolution:
    system: DdmSystem
    data: np.ndarray
    report: Optional[GmresReport] = None
    outer_iterations: Optional[int] = None

    @property
    def iterations(self) -> int:
        if self.outer_iterations is not None:
            return self.outer_iterations
        return self.report.iterations if self.report is not None else 0

    def traces(self, j: int):
        """(u, eps^{-1} w du/dn) on the boundary of subdomain j."""
        psi = np.asarray(self.data)[self.system.positions[j]]
        solver = self.system.solvers[j]
        u = solver.solve(psi)
        return u, psi - solver.impedance @ u

    def far_field(self, directions) -> np.ndarray:
        u0, dn0 = self.traces(0)
        return scattered_far_field(self.system.geometry, self.system.scenario, u0, dn0, directions)


def _layout_slices(geometry: Geometry, layout: list):
    slices, pos = {}, 0
    positions = [np.full(b.size, -1) for b in geometry.boundaries]
    for key in layout:
        j, nb = key
        b = geometry.boundaries[j]
        local = np.arange(b.size) if nb is None else np.arange(b.size)[b.interface_slice(nb)]
        slices[key] = slice(pos, pos + len(local))
        positions[j][local] = pos + np.arange(len(local))
        pos += len(local)
    for j, p in enumerate(positions):
        if (p < 0).any():
            raise ValueError(f"layout leaves part of boundary {j} without unknowns")
    return slices, positions, pos


def assemble_ddm(s: Scenario, geometry: Optional[Geometry] = None, formulation: str = "classical",
                 layout: Optional[list] = None, cache: Optional[OperatorCache] = None) -> DdmSystem:
    if formulation not in IMPEDANCE_OF:
        raise ValueError(f"unknown DDM variant {formulation!r}; expected one of {sorted(IMPEDANCE_OF)}")
    g = geometry if geometry is not None else build_geometry(s, "ddm")
    cache = cache or OperatorCache()
    variant = IMPEDANCE_OF[formulation]
    imps = [blended_impedance(g, s, j, variant, cache) for j in range(g.n_subdomains)]
    solvers = [robin_solver(b, m, t, cache) for b, m, t in zip(g.boundaries, s.media, imps)]
    maps = [rtr_map(b, m, t, solver=sol)
            for b, m, t, sol in zip(g.boundaries, s.media, imps, solvers)]
    layout = layout or default_layout(g)
    slices, positions, size = _layout_slices(g, layout)

    blocks = []
    pairs = g.exchange.pairs
    for (j, nb), (idx_j, idx_nb) in pairs.items():
        # data sent from nb to j: -eps^{-1} w du/dn + T_j u, written through nb's map
        b_nb = g.boundaries[nb]
        t_cross = np.zeros((b_nb.size, b_nb.size), dtype=complex)
        t_cross[np.ix_(idx_nb, idx_nb)] = imps[j].matrix[np.ix_(idx_j, idx_j)]
        if variant == "classical":
            out = maps[nb].full[idx_nb]
        else:
            out = (np.eye(b_nb.size) - (imps[nb].matrix + t_cross) @ solvers[nb].trace)[idx_nb]
        blocks.append((positions[j][idx_j], positions[nb], out))

    rhs = np.zeros(size, dtype=complex)
    b0 = g.boundaries[0]
    inc = plane_wave_trace(s, b0)
    rhs[positions[0]] = -inc.neumann - imps[0].matrix @ inc.dirichlet
    for nb in b0.neighbors:
        idx_nb, idx_0 = pairs[(nb, 0)]
        t_nb = imps[nb].matrix[np.ix_(idx_nb, idx_nb)]
        rhs[positions[nb][idx_nb]] += -inc.neumann[idx_0] + t_nb @ inc.dirichlet[idx_0]
    return DdmSystem(s, g, formulation, solvers, maps, layout, slices, positions, blocks, rhs)


def solve_ddm_iterative(system: DdmSystem, tol: Optional[float] = None,
                        maxit: Optional[int] = None, raise_on_failure: bool = False) -> DdmSolution:
    s = system.scenario
    tol = s.gmres_tol if tol is None else tol
    maxit = s.gmres_maxit if maxit is None else maxit
    report = gmres(system.apply, system.rhs, tol=tol, maxit=maxit)
    if raise_on_failure and not report.converged:
        raise ConvergenceError(f"DDM GMRES stalled at residual {report.residual:.2e}", report)
    return DdmSolution(system, report.solution, report)


def solve_ddm_direct(system: DdmSystem) -> DdmSolution:
    return DdmSolution(system, dense_solve(system.dense(), system.rhs))


# ---------------------------------------------------------------- Schur elimination

@dataclass
class MergedRtR:
    """Reduced coupling after eliminating the interior interfaces."""

    matrix: np.ndarray            # acts on [f_j0 ...] and lands on f0
    exterior: np.ndarray          # S0 restricted: f0 -> [f_j0 ...]
    rhs_interior: np.ndarray
    rhs_exterior: np.ndarray
    interior_index: np.ndarray
    exterior_index: np.ndarray
    steps: list = field(default_factory=list)
    n_trunc: Optional[int] = None

    @property
    def size(self) -> int:
        return self.matrix.shape[1]


def _inner_inverse(q, p, n_trunc: Optional[int]):
    """``(I - Q P)^{-1}`` exactly or by a truncated Neumann series."""
    qp = q @ p
    eye = np.eye(qp.shape[0], dtype=complex)
    if n_trunc is None:
        try:
            return dense_solve(eye - qp, eye)
        except SingularMatrixError as exc:
            raise SingularMatrixError("interface merge matrix I - S S is singular",
                                      exc.condition) from None
    total, term = eye.copy(), eye.copy()
    for _ in range(n_trunc):
        term = term @ qp
        total = total + term
    return total


def _pair_inverse(m, a, b, n_trunc):
    """Inverse of [[I, P], [Q, I]] on index sets a, b in closed form.

    Diagonal blocks other than the identity (possible when groups are
    eliminated in an unusual order) are first divided out.
    """
    maa, mbb = m[np.ix_(a, a)], m[np.ix_(b, b)]
    p, q = m[np.ix_(a, b)], m[np.ix_(b, a)]
    scale_a = scale_b = None
    if not np.allclose(maa, np.eye(len(a)), atol=1e-10):
        scale_a = dense_solve(maa, np.eye(len(a), dtype=complex))
        p = scale_a @ p
    if not np.allclose(mbb, np.eye(len(b)), atol=1e-10):
        scale_b = dense_solve(mbb, np.eye(len(b), dtype=complex))
        q = scale_b @ q
    w = _inner_inverse(q, p, n_trunc)
    pw = p @ w
    top = np.hstack([np.eye(len(a)) + pw @ q, -pw])
    bottom = np.hstack([-w @ q, w])
    out = np.vstack([top, bottom])
    if scale_a is not None:
        out[:, :len(a)] = out[:, :len(a)] @ scale_a
    if scale_b is not None:
        out[:, len(a):] = out[:, len(a):] @ scale_b
    return out


def schur_eliminate(system: DdmSystem, groups: Optional[list] = None,
                    n_trunc: Optional[int] = None) -> MergedRtR:
    """Eliminate interior-interface data group by group.

    Each group is a pair of key lists (A, B) whose block of the current
    matrix is ``[[I, P], [Q, I]]``.
    """
    g = system.geometry
    groups = default_groups(g) if groups is None else groups
    m = system.dense()
    rhs = system.rhs.copy()
    active = np.ones(system.size, bool)
    steps = []

    def idx(keys):
        return np.concatenate([np.arange(system.size)[system.slices[k]] for k in keys])

    for keys_a, keys_b in groups:
        a, b = idx(keys_a), idx(keys_b)
        e = np.concatenate([a, b])
        active[e] = False
        rest = np.flatnonzero(active)
        dinv = _pair_inverse(m, a, b, n_trunc)
        m_re = m[np.ix_(rest, e)]
        m_er = m[np.ix_(e, rest)]
        m[np.ix_(rest, rest)] -= m_re @ (dinv @ m_er)
        rhs[rest] -= m_re @ (dinv @ rhs[e])
        steps.append((tuple(keys_a), tuple(keys_b), e, rest, dinv, m_er.copy(), rhs[e].copy()))

    ext = idx([EXTERIOR])
    interior = np.array([i for i in np.flatnonzero(active) if i not in set(ext)])
    if not np.allclose(m[np.ix_(interior, interior)], np.eye(len(interior)), atol=1e-10):
        raise ValueError("reduced system is not of the expected [[I, S0], [S_int, I]] form")
    return MergedRtR(m[np.ix_(ext, interior)], m[np.ix_(interior, ext)], rhs[interior], rhs[ext],
                     interior, ext, steps, n_trunc)


def neumann_merge(system: DdmSystem, n_trunc: int, groups: Optional[list] = None) -> MergedRtR:
    if n_trunc < 0:
        raise ValueError("n_trunc must be >= 0")
    return schur_eliminate(system, groups, n_trunc=n_trunc)


def solve_outer(system: DdmSystem, merged: MergedRtR, tol: Optional[float] = None,
                maxit: Optional[int] = None, direct: bool = False) -> DdmSolution:
    """Solve ``(I - S_int S0) f0 = c - S_int b`` and back-substitute."""
    s = system.scenario
    tol = s.gmres_tol if tol is None else tol
    maxit = s.gmres_maxit if maxit is None else maxit
    s_int, s0 = merged.matrix, merged.exterior
    rhs = merged.rhs_exterior - s_int @ merged.rhs_interior
    if direct:
        f0 = dense_solve(np.eye(len(rhs)) - s_int @ s0, rhs)
        report = None
    else:
        report = gmres(lambda x: x - s_int @ (s0 @ x), rhs, tol=tol, maxit=maxit)
        f0 = report.solution
    full = np.zeros(system.size, dtype=complex)
    full[merged.exterior_index] = f0
    full[merged.interior_index] = merged.rhs_interior - s0 @ f0
    # undo eliminations in reverse order
    for _, _, e, rest, dinv, m_er, rhs_e in reversed(merged.steps):
        full[e] = dinv @ (rhs_e - m_er @ full[rest])
    return DdmSolution(system, full, report, None if report is None else report.iterations)


def far_field_reference_error(solution: DdmSolution, reference, directions=None) -> float:
    if directions is None:
        directions = equispaced_angles(len(reference))
    return far_field_error(solution.far_field(directions), reference)


def residual(system: DdmSystem, data) -> float:
    r = system.apply(data) - system.rhs
    return float(np.linalg.norm(r) / np.linalg.norm(system.rhs))


def spectral_radius(a, b) -> float:
    """Largest |eigenvalue| of the product of two interface maps."""
    return float(np.abs(np.linalg.eigvals(a @ b)).max())


def interface_pair_maps(system: DdmSystem, j: int, l: int):
    """The blocks S^j_{lj,jl} and S^l_{jl,lj} coupling the two sides of one interface."""
    return system.block((l, j), (j, l)), system.block((j, l), (l, j))


__all__ = ["DdmSystem", "DdmSolution", "MergedRtR", "ConvergenceError", "assemble_ddm",
           "solve_ddm_iterative", "solve_ddm_direct", "schur_eliminate", "neumann_merge",
           "solve_outer", "default_layout", "default_groups", "residual", "spectral_radius",
           "interface_pair_maps", "RtRBlocks", "RobinSolver"]
