"""Calderon blocks of each subdomain and the signed trace-exchange operators.

Cauchy data on a subdomain boundary are stored as ``[u, w * eps^{-1} du/dn]``
(plain Dirichlet samples followed by weighted, eps-scaled Neumann samples).
For such data of a field solving the Helmholtz equation inside the
subdomain, the Calderon block returns minus one half of its input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bio import BioKind, operator_set
from .scenario import CauchyTrace, Medium

__all__ = ["CalderonBlock", "CauchyTrace", "calderon_block", "calderon_blocks",
           "exchange_apply", "exchange_matrix", "ExchangeBlock"]


@dataclass
class CalderonBlock:
    index: int
    medium: Medium
    ops: dict
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0] // 2

    def __matmul__(self, other):
        return self.matrix @ other

    def projector_defect(self) -> float:
        """Spectral norm of C^2 - I/4."""
        c = self.matrix
        return float(np.linalg.norm(c @ c - 0.25 * np.eye(c.shape[0]), 2))


def calderon_block(boundary, medium: Medium, ops: dict | None = None) -> CalderonBlock:
    """``[[K, -eps S], [eps^{-1} N, -K^T]]`` at the subdomain wavenumber."""
    if ops is None:
        ops = operator_set(boundary, medium.wavenumber)
    eps = medium.epsilon
    mat = np.block([[ops[BioKind.K], -eps * ops[BioKind.S]],
                    [ops[BioKind.N] / eps, -ops[BioKind.KT]]])
    return CalderonBlock(boundary.index, medium, ops, mat)


def calderon_blocks(geometry, scenario) -> list:
    return [calderon_block(b, m) for b, m in zip(geometry.boundaries, scenario.media)]


@dataclass
class ExchangeBlock:
    """``diag(X_jl, -X_jl)`` between Cauchy data on boundary l and boundary j."""

    j: int
    l: int
    rows: np.ndarray
    cols: np.ndarray
    shape: tuple

    def apply(self, data_l):
        data_l = np.asarray(data_l)
        nl = self.shape[1] // 2
        nj = self.shape[0] // 2
        out = np.zeros(2 * nj, dtype=np.result_type(data_l, float))
        out[self.rows] = data_l[self.cols]
        out[nj + self.rows] = -data_l[nl + self.cols]
        return out

    def dense(self) -> np.ndarray:
        nj, nl = self.shape[0] // 2, self.shape[1] // 2
        m = np.zeros(self.shape)
        m[self.rows, self.cols] = 1.0
        m[nj + self.rows, nl + self.cols] = -1.0
        return m


def exchange_block(geometry, j: int, l: int) -> ExchangeBlock:
    ex = geometry.exchange
    if (j, l) not in ex.pairs:
        raise KeyError(f"subdomains {j} and {l} share no interface")
    rows, cols = ex.pairs[(j, l)]
    return ExchangeBlock(j, l, rows, cols, (2 * ex.sizes[j], 2 * ex.sizes[l]))


def exchange_matrix(geometry, j: int, l: int) -> np.ndarray:
    return exchange_block(geometry, j, l).dense()


def exchange_apply(geometry, pair, data_l):
    """Dirichlet part copied, Neumann part negated, zero away from the interface."""
    j, l = pair
    if isinstance(data_l, CauchyTrace):
        data_l = data_l.stacked()
    return exchange_block(geometry, j, l).apply(data_l)


def scattered_far_field(geometry, scenario, dirichlet, neumann_weighted, directions):
    """Far field of the radiating field with the given Cauchy data on the
    exterior boundary (Neumann data eps0-scaled and weighted)."""
    from .bio import LayerDensity, far_field

    b0 = geometry.boundaries[0]
    dn = scenario.epsilons[0] * np.asarray(neumann_weighted) / b0.weights
    layer = LayerDensity.on_boundary(b0, None, -np.asarray(dirichlet))
    layer.single = dn
    return far_field([layer], scenario.wavenumbers[0], directions)


def incident_trace(geometry, scenario) -> np.ndarray:
    """Stacked Cauchy data of the incident wave on the exterior boundary."""
    from .scenario import plane_wave_trace

    return plane_wave_trace(scenario, geometry.boundaries[0]).stacked()
