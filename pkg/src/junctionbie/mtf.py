"""Local multi-trace formulation: every subdomain carries its own Cauchy data.

Unknowns are ``[u_0, u_1, ...]`` with ``u_j = [u, w * eps_j^{-1} du/dn]`` on
the boundary of subdomain ``j``; ``u_0`` is the scattered field. Row ``j``
reads ``C_j u_j + 1/2 sum_l X_jl u_l = rhs_j`` with
``rhs_0 = u_inc / 2`` and ``rhs_j = -X_j0 u_inc / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calculus import (CauchyTrace, calderon_blocks, exchange_block, incident_trace,
                       scattered_far_field)
from .geometry import Geometry, build_geometry
from .numerics import GmresReport, gmres
from .scenario import Scenario

VARIANTS = ("plain", "calderon", "schur")


@dataclass
class MtfSystem:
    scenario: Scenario
    geometry: Geometry
    blocks: list
    matrix: np.ndarray
    rhs: np.ndarray
    offsets: list
    u_inc: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def split(self, x) -> list:
        return [x[sl] for sl in self.offsets]


@dataclass
class MtfSolution:
    traces: list
    report: GmresReport
    system: MtfSystem
    variant: str

    def far_field(self, directions) -> np.ndarray:
        u0 = self.traces[0]
        return scattered_far_field(self.system.geometry, self.system.scenario,
                                   u0.dirichlet, u0.neumann, directions)


def _slices(sizes):
    out, pos = [], 0
    for n in sizes:
        out.append(slice(pos, pos + n))
        pos += n
    return out


def assemble_mtf(s: Scenario, geometry: Optional[Geometry] = None, blocks=None) -> MtfSystem:
    geometry = geometry or build_geometry(s, "mtf")
    blocks = blocks or calderon_blocks(geometry, s)
    sizes = [2 * b.size for b in geometry.boundaries]
    sl = _slices(sizes)
    total = sum(sizes)
    mat = np.zeros((total, total), dtype=complex)
    for j, blk in enumerate(blocks):
        mat[sl[j], sl[j]] = blk.matrix
        for l in geometry.neighbors(j):
            mat[sl[j], sl[l]] += 0.5 * exchange_block(geometry, j, l).dense()
    u_inc = incident_trace(geometry, s)
    rhs = np.zeros(total, dtype=complex)
    rhs[sl[0]] = 0.5 * u_inc
    for j in geometry.neighbors(0):
        rhs[sl[j]] = -0.5 * exchange_block(geometry, j, 0).apply(u_inc)
    return MtfSystem(s, geometry, blocks, mat, rhs, sl, u_inc)


def _to_traces(system, x) -> list:
    out = []
    for part, b in zip(system.split(x), system.geometry.boundaries):
        out.append(CauchyTrace(part[: b.size], part[b.size:]))
    return out


def schur_reduced(system: MtfSystem):
    """Eliminate the exterior unknowns using ``4 C_0^2 = I``.

    Returns ``(matrix, rhs, reconstruct)`` for the interior unknowns, already
    left-preconditioned by the interior Calderon blocks; ``reconstruct`` maps
    interior unknowns to the full unknown vector.
    """
    g, blocks = system.geometry, system.blocks
    c0 = blocks[0].matrix
    u_inc = system.u_inc
    interior = list(range(1, len(blocks)))
    sizes = [2 * g.boundaries[j].size for j in interior]
    sl = dict(zip(interior, _slices(sizes)))
    total = sum(sizes)
    x0 = {l: exchange_block(g, 0, l).dense() for l in g.neighbors(0)}
    mat = np.zeros((total, total), dtype=complex)
    rhs = np.zeros(total, dtype=complex)
    c0_inc = c0 @ u_inc
    for j in interior:
        mat[sl[j], sl[j]] += blocks[j].matrix
        for l in g.neighbors(j):
            if l != 0:
                mat[sl[j], sl[l]] += 0.5 * exchange_block(g, j, l).dense()
        if 0 in g.neighbors(j):
            xj0 = exchange_block(g, j, 0).dense()
            for l, x0l in x0.items():
                mat[sl[j], sl[l]] -= xj0 @ (c0 @ x0l)
            rhs[sl[j]] = -0.5 * (xj0 @ u_inc) - xj0 @ c0_inc
    precond = np.zeros_like(mat)
    for j in interior:
        precond[sl[j], sl[j]] = blocks[j].matrix

    def reconstruct(y):
        acc = np.zeros(c0.shape[0], dtype=complex)
        for l, x0l in x0.items():
            acc += x0l @ y[sl[l]]
        u0 = 2 * c0_inc - 2 * (c0 @ acc)
        return np.concatenate([u0, y])

    return precond @ mat, precond @ rhs, reconstruct


def solve_mtf(system: MtfSystem, variant: str = "plain", tol: Optional[float] = None,
              maxit: Optional[int] = None) -> MtfSolution:
    s = system.scenario
    tol = s.gmres_tol if tol is None else tol
    maxit = s.gmres_maxit if maxit is None else maxit
    if variant == "plain":
        report = gmres(system.matrix, system.rhs, tol, maxit)
        x = report.solution
    elif variant == "calderon":
        pre = np.zeros_like(system.matrix)
        for sl, blk in zip(system.offsets, system.blocks):
            pre[sl, sl] = blk.matrix
        report = gmres(pre @ system.matrix, pre @ system.rhs, tol, maxit)
        x = report.solution
    elif variant == "schur":
        mat, rhs, reconstruct = schur_reduced(system)
        report = gmres(mat, rhs, tol, maxit)
        x = reconstruct(report.solution)
    else:
        raise ValueError(f"unknown MTF variant {variant!r}; choose from {', '.join(VARIANTS)}")
    return MtfSolution(_to_traces(system, x), report, system, variant)
