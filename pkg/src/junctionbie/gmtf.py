"""Global (skeleton) multi-trace formulation of the second kind.

The field in every subdomain ``m`` is sought as ``SL_m[v] - eps_m DL_m[p]``
with one pair of densities ``(v, p)`` on the whole skeleton. On each
interface between subdomains ``l < j`` the skeleton normal points out of
``l``. Matching Dirichlet and scaled Neumann traces across the interface
gives, with operators on the skeleton at the indicated wavenumber,

    (eps_l + eps_j)/2 p + (S_l - S_j) v + (eps_j K_j - eps_l K_l) p
        = -[l == 0] u_inc
    (1/eps_l + 1/eps_j)/2 v + (K'_l/eps_l - K'_j/eps_j) v + (N_j - N_l) p
        = -[l == 0] du_inc/dn / eps_0

Both rows are multiplied by the node weight and solved for the weighted
densities, which vanish at junctions. A skeleton integral over a source
interface is evaluated with the closed-curve matrix of a subdomain boundary
containing both target and source interfaces (the zero-extended weighted
density stays smooth there); pairs with no common boundary use the plain
trapezoid rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bio import BioKind, LayerDensity, OperatorCache, far_field, point_kernels
from .geometry import Geometry, build_geometry
from .numerics import GmresReport, gmres
from .scenario import Scenario, plane_wave


class OrientationError(ValueError):
    pass


@dataclass
class GmtfSystem:
    scenario: Scenario
    geometry: Geometry
    matrix: np.ndarray
    rhs: np.ndarray
    offsets: dict
    orientation: str = "alternating"

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class GmtfSolution:
    v_weighted: np.ndarray
    p_weighted: np.ndarray
    report: GmresReport
    system: GmtfSystem

    def layers(self, m: int = 0) -> list:
        """Skeleton layer densities representing the field of subdomain m."""
        s, g = self.system.scenario, self.system.geometry
        eps = s.epsilons[m]
        out = []
        for itf in g.skeleton.interfaces:
            sl = self.system.offsets[itf.key]
            ds = itf.weights * _ref_step(g)
            tau = skeleton_sign(itf, self.system.orientation)
            out.append(LayerDensity(itf.points, tau * itf.normals, ds,
                                    self.v_weighted[sl] / itf.weights,
                                    -eps * self.p_weighted[sl] / itf.weights,
                                    float(ds.max())))
        return out

    def far_field(self, directions) -> np.ndarray:
        s = self.system.scenario
        return far_field(self.layers(0), s.wavenumbers[0], directions)


def _ref_step(g: Geometry) -> float:
    b = g.boundaries[0]
    return 2 * np.pi / (b.n_per_arc * b.arc_reference)


def skeleton_sign(itf, orientation: str = "alternating") -> float:
    """+1 when the skeleton normal points out of the lower-index subdomain.

    ``alternating``: out of the exterior on exterior interfaces and into the
    lower-index subdomain on interior ones. ``outward_low``: always out of
    the lower-index subdomain.
    """
    if isinstance(orientation, dict):
        return float(orientation[itf.key])
    if orientation == "outward_low" or itf.low == 0:
        return 1.0
    if orientation == "alternating":
        return -1.0
    raise ValueError(f"unknown skeleton orientation {orientation!r}")


def _positions(b, itf, tau):
    """Node positions of an interface on boundary b and the sign of b's
    normal relative to the skeleton normal."""
    if b.index == itf.low:
        return itf.low_index, tau
    if b.index == itf.high:
        return itf.high_index, -tau
    return None, 0.0


def _check_orientation(g: Geometry):
    for itf in g.skeleton.interfaces:
        lo = g.boundaries[itf.low]
        hi = g.boundaries[itf.high]
        a = lo.normals[itf.low_index]
        b = hi.normals[itf.high_index]
        if np.abs(a + b).max() > 1e-10:
            raise OrientationError(f"normals on interface {itf.key} are not opposite")


def assemble_gmtf(s: Scenario, geometry: Optional[Geometry] = None,
                  cache: Optional[OperatorCache] = None,
                  orientation: str = "alternating") -> GmtfSystem:
    g = geometry or build_geometry(s, "gmtf")
    _check_orientation(g)
    cache = cache or OperatorCache()
    eps, ks = s.epsilons, s.wavenumbers
    itfs = g.skeleton.interfaces
    offsets = g.skeleton.offsets()
    m = g.skeleton.size
    mat = np.zeros((2 * m, 2 * m), dtype=complex)
    rhs = np.zeros(2 * m, dtype=complex)
    href = _ref_step(g)

    for I in itfs:
        l, j = I.key
        tau = skeleton_sign(I, orientation)
        rI = offsets[I.key]
        wI = I.weights
        mat[rI, m + rI.start:m + rI.stop][np.diag_indices(I.size)] += (eps[l] + eps[j]) / 2
        mat[m + rI.start:m + rI.stop, rI][np.diag_indices(I.size)] += (1 / eps[l] + 1 / eps[j]) / 2
        for J in itfs:
            cJ = offsets[J.key]
            wJ = J.weights
            host = None
            for b in g.boundaries:
                pi, si = _positions(b, I, tau)
                pj, sj = _positions(b, J, skeleton_sign(J, orientation))
                if pi is not None and pj is not None:
                    host = (b, pi, si, pj, sj)
                    break
            if host is not None:
                b, pi, si, pj, sj = host
                sub = np.ix_(pi, pj)

                def op(k, kind):
                    return cache.matrix(b, k, kind)[sub]

                s_d = op(ks[l], BioKind.S) - op(ks[j], BioKind.S)
                k_d = (eps[j] * op(ks[j], BioKind.K) - eps[l] * op(ks[l], BioKind.K)) * sj
                kt_d = (op(ks[l], BioKind.KT) / eps[l] - op(ks[j], BioKind.KT) / eps[j]) * si
                n_d = cache.ndiff(b, ks[j], ks[l])[sub] * (si * sj)
            else:
                def kern(k):
                    return point_kernels(I.points, tau * I.normals, J.points,
                                         skeleton_sign(J, orientation) * J.normals, k)

                gl, dnyl, dnxl, hypl = kern(ks[l])
                gj, dnyj, dnxj, hypj = kern(ks[j])
                # plain trapezoid on weighted densities: sum f(y) p^w h
                s_d = (gl - gj) * href
                k_d = (eps[j] * dnyj - eps[l] * dnyl) * href * wJ[None, :]
                kt_d = (dnxl / eps[l] - dnxj / eps[j]) * href * wI[:, None]
                n_d = (hypj - hypl) * href * wI[:, None]
            mat[rI, cJ] += tau * wI[:, None] * s_d
            mat[rI, m + cJ.start:m + cJ.stop] += tau * wI[:, None] * k_d / wJ[None, :]
            mat[m + rI.start:m + rI.stop, cJ] += tau * kt_d
            mat[m + rI.start:m + rI.stop, m + cJ.start:m + cJ.stop] += tau * n_d
        if l == 0:
            u, grad = plane_wave(s, I.points)
            dn = np.einsum("ij,ij->i", grad, I.normals) / eps[0]
            rhs[rI] = -tau * wI * u
            rhs[m + rI.start:m + rI.stop] = -wI * dn
    return GmtfSystem(s, g, mat, rhs, offsets, orientation)


def solve_gmtf(system: GmtfSystem, tol: Optional[float] = None,
               maxit: Optional[int] = None) -> GmtfSolution:
    s = system.scenario
    tol = s.gmres_tol if tol is None else tol
    maxit = s.gmres_maxit if maxit is None else maxit
    report = gmres(system.matrix, system.rhs, tol, maxit)
    m = system.size // 2
    return GmtfSolution(report.solution[:m], report.solution[m:], report, system)
