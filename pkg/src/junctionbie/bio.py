"""Nystrom matrices of the four Helmholtz boundary integral operators, layer
potentials off the boundary, and far-field evaluation.

All matrices act in the weighted convention: Dirichlet data are plain
samples, Neumann-type densities are samples multiplied by the node weight
(see :mod:`junctionbie.geometry`). With ``w = r * |x'(t)|`` (``r`` the
constant weight ratio of the boundary) the assembled operators are

* ``S``  : weighted density  -> plain values
* ``K``  : plain values      -> plain values
* ``KT`` : weighted density  -> weighted values
* ``N``  : plain values      -> weighted values

Log-singular kernels are split as ``M1(t,s) log(4 sin^2((t-s)/2)) + M2(t,s)``;
the log part is integrated exactly against the trigonometric interpolant and
the smooth part by the trapezoid rule. ``N`` is built from the Maue
identity ``N = d/ds S d/ds + k^2 n.S n``.
"""
from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .numerics import (EULER_GAMMA, bessel_j0_j1, circulant_from_symbol,
                       differentiation_matrix, hankel_h0_h1, log_quadrature_weights,
                       trig_modes)


class BioKind(enum.Enum):
    S = "single_layer"
    K = "double_layer"
    KT = "adjoint_double_layer"
    N = "hypersingular"


@dataclass(frozen=True)
class OperatorMatrix:
    kind: BioKind
    wavenumber: complex
    source: int
    target: int
    matrix: np.ndarray

    def __matmul__(self, other):
        return self.matrix @ other

    @property
    def shape(self):
        return self.matrix.shape


class ProximityWarning(UserWarning):
    """Evaluation point too close to a boundary for plain trapezoid sums."""


def _check_k(k) -> complex:
    k = complex(k)
    if k == 0:
        raise ValueError("wavenumber 0 is not supported (Helmholtz kernels only)")
    if k.imag < 0:
        raise ValueError(f"wavenumber must have Im k >= 0, got {k}")
    return k


class BoundaryKernels:
    """Kernel pieces of one closed boundary at one wavenumber, computed once.

    Geometry-only quantities (distances, log weights, differentiation) are
    shared across wavenumbers through a small per-boundary cache.
    """

    def __init__(self, boundary, k):
        self.b = boundary
        self.k = _check_k(k)
        g = _GeometryTerms.of(boundary)
        self.g = g
        kr = self.k * g.r_safe
        h0, h1 = hankel_h0_h1(kr)
        j0, j1 = bessel_j0_j1(kr)
        self.h0, self.h1, self.j0, self.j1 = h0, h1, j0, j1
        self._cache = {}

    # --- log-split single layer in the t variable (no speed factor)
    def _single_parts(self):
        if "S" not in self._cache:
            g, k = self.g, self.k
            m = 0.25j * self.h0
            m1 = -self.j0 / (4 * np.pi)
            m2 = m - m1 * g.logsin
            d = np.arange(g.n)
            m1[d, d] = -1.0 / (4 * np.pi)
            m2[d, d] = (0.25j - EULER_GAMMA / (2 * np.pi)
                        - np.log(k * g.speed / 2) / (2 * np.pi))
            self._cache["S"] = (m1, m2)
        return self._cache["S"]

    def single_t(self) -> np.ndarray:
        """int G(x(t)-x(s)) phi(s) ds over the parameter (no |x'| factor)."""
        m1, m2 = self._single_parts()
        return self.g.R * m1 + self.g.h * m2

    def single_nn_t(self) -> np.ndarray:
        m1, m2 = self._single_parts()
        nn = self.g.nunu
        return self.g.R * (m1 * nn) + self.g.h * (m2 * nn)

    def _double(self, adjoint: bool) -> np.ndarray:
        g, k = self.g, self.k
        if adjoint:
            proj = -g.proj_target
        else:
            proj = g.proj_source
        lk = 0.25j * k * self.h1 * proj
        l1 = -(k / (4 * np.pi)) * self.j1 * proj
        d = np.arange(g.n)
        l1[d, d] = 0.0
        l2 = lk - l1 * g.logsin
        l2[d, d] = g.curv_diag
        return g.R * l1 + g.h * l2

    def matrix(self, kind: BioKind) -> np.ndarray:
        if kind in self._cache:
            return self._cache[kind]
        r = self.b.weight_ratio
        if kind is BioKind.S:
            out = self.single_t() / r
        elif kind is BioKind.K:
            # subtract the Laplace double layer of a constant (known in closed
            # form) so that the near-corner rows see a vanishing integrand
            out = self._double(adjoint=False)
            out[np.diag_indices_from(out)] += self.g.laplace_row_fix
        elif kind is BioKind.KT:
            out = self._double(adjoint=True)
        elif kind is BioKind.N:
            # d/dt R d/dt loses the Nyquist mode; take the constant log part
            # out and replace it by its exact multiplier -|m|/2
            g = self.g
            m1, m2 = self._single_parts()
            smooth = g.R * (m1 + 1.0 / (4 * np.pi)) + g.h * m2
            out = r * (g.D @ smooth @ g.D + g.T + self.k ** 2 * self.single_nn_t())
        else:  # pragma: no cover
            raise ValueError(kind)
        self._cache[kind] = out
        return out


class _GeometryTerms:
    _store: dict = {}

    @classmethod
    def of(cls, boundary):
        key = id(boundary)
        hit = cls._store.get(key)
        if hit is not None and hit.b is boundary:
            return hit
        terms = cls(boundary)
        if len(cls._store) > 64:
            cls._store.clear()
        cls._store[key] = terms
        return terms

    def __init__(self, b):
        self.b = b
        n = b.size
        self.n = n
        self.h = 2 * np.pi / n
        x = b.points
        diff = x[:, None, :] - x[None, :, :]
        r = np.hypot(diff[..., 0], diff[..., 1])
        d = np.arange(n)
        r_safe = r.copy()
        r_safe[d, d] = 1.0
        self.r_safe = r_safe
        idx = d[:, None] - d[None, :]
        with np.errstate(divide="ignore"):
            logsin = np.log(4 * np.sin(self.h * idx / 2) ** 2)
        logsin[d, d] = 0.0
        self.logsin = logsin
        nu = b.nu
        self.speed = b.speed
        # nu(s).(x(t)-x(s))/r and nu(t).(x(t)-x(s))/r
        self.proj_source = np.einsum("ijk,jk->ij", diff, nu) / r_safe
        self.proj_target = np.einsum("ijk,ik->ij", diff, nu) / r_safe
        self.nunu = nu @ nu.T
        cross = b.d1[:, 0] * b.d2[:, 1] - b.d1[:, 1] * b.d2[:, 0]
        self.curv_diag = -cross / (4 * np.pi * self.speed ** 2)
        self.R = log_quadrature_weights(n)
        self.D = differentiation_matrix(n)
        lap = self.h * np.einsum("ijk,jk->ij", diff, nu) / (2 * np.pi * r_safe ** 2)
        lap[d, d] = self.h * self.curv_diag
        interior = np.sum(x[:, 0] * b.d1[:, 1] - x[:, 1] * b.d1[:, 0]) > 0
        self.laplace_row_fix = (-0.5 if interior else 0.5) - lap.sum(axis=1)
        m = trig_modes(n)
        self.T = circulant_from_symbol(-0.5 * np.abs(m)).real


def kernels(boundary, k) -> BoundaryKernels:
    return BoundaryKernels(boundary, k)


def assemble_bio(kind: BioKind, boundary, k) -> OperatorMatrix:
    """Weighted Nystrom matrix of one boundary integral operator on a closed boundary."""
    if isinstance(kind, str):
        kind = BioKind[kind]
    ker = BoundaryKernels(boundary, k)
    return OperatorMatrix(kind, complex(k), boundary.index, boundary.index, ker.matrix(kind))


def operator_set(boundary, k) -> dict:
    """All four weighted matrices on one boundary, sharing kernel evaluations."""
    ker = BoundaryKernels(boundary, k)
    return {kind: ker.matrix(kind) for kind in BioKind}


def hypersingular_difference(boundary, k_plus, k_minus) -> np.ndarray:
    """Weighted ``N_{k_plus} - N_{k_minus}`` assembled directly from its
    log-singular kernel. Unlike the Maue form this needs no differentiation
    of the density, so it stays accurate for densities with jumps."""
    kp, km = _check_k(k_plus), _check_k(k_minus)
    g = _GeometryTerms.of(boundary)
    d = np.arange(g.n)
    x = boundary.points
    nu = boundary.nu
    unit = boundary.normals
    diff = x[:, None, :] - x[None, :, :]
    zhat = diff / g.r_safe[..., None]
    a = np.einsum("ijk,ik->ij", zhat, nu)     # nu(t).zhat
    bb = np.einsum("ijk,jk->ij", zhat, unit)  # n(s).zhat
    nn = nu @ unit.T
    cross = nn - 2 * a * bb
    r = g.r_safe

    def parts(k):
        kr = k * r
        h0, h1 = hankel_h0_h1(kr)
        j0, j1 = bessel_j0_j1(kr)
        full = 0.25j * k ** 2 * h0 * a * bb + 0.25j * k * h1 / r * cross
        log = -(k ** 2 / (4 * np.pi)) * j0 * a * bb - (k / (4 * np.pi * r)) * j1 * cross
        return full, log

    fp, lp = parts(kp)
    fm, lm = parts(km)
    full = fp - fm
    l1 = lp - lm
    # the 1/r^2 parts cancel in the difference; diagonal limits below
    l1[d, d] = -(kp ** 2 - km ** 2) / (8 * np.pi) * g.speed
    l2 = full - l1 * g.logsin
    dk2 = kp ** 2 - km ** 2
    l2[d, d] = g.speed * (
        1j * dk2 / 8 + (1 - 2 * EULER_GAMMA) * dk2 / (8 * np.pi)
        - (kp ** 2 * np.log(kp / 2) - km ** 2 * np.log(km / 2)) / (4 * np.pi)
        - dk2 / (8 * np.pi) * np.log(g.speed ** 2))
    # p(s) |x'(s)| ds = p^w ds / r and the output weight r |x'(t)| cancel the
    # ratio, leaving nu(t) in place of the target normal
    return g.R * l1 + g.h * l2


# ---------------------------------------------------------------- potentials

@dataclass
class LayerDensity:
    """Single- and double-layer densities on a sampled curve.

    ``single`` and ``double`` are plain (unweighted) samples; ``ds`` are the
    arc-length quadrature weights. The potential is ``SL[single] + DL[double]``
    with the double layer taken along ``normals``.
    """

    points: np.ndarray
    normals: np.ndarray
    ds: np.ndarray
    single: Optional[np.ndarray] = None
    double: Optional[np.ndarray] = None
    spacing: float = 0.0

    @classmethod
    def on_boundary(cls, boundary, single_weighted=None, double=None):
        """Densities on a mesh; the single-layer density is given weighted."""
        ds = boundary.speed * 2 * np.pi / boundary.size
        single = None
        if single_weighted is not None:
            single = np.asarray(single_weighted) / boundary.weights
        spacing = float(ds.max())
        return cls(boundary.points, boundary.normals, ds, single, double, spacing)


def arc_weights(boundary) -> np.ndarray:
    """Arc-length quadrature weights of the trapezoid rule on the mesh."""
    return boundary.speed * 2 * np.pi / boundary.size


def _distance_check(points, layer: LayerDensity, factor: float, what: str):
    if layer.spacing <= 0:
        return np.zeros(len(points), dtype=bool)
    diff = points[:, None, :] - layer.points[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1]).min(axis=1)
    close = dist < factor * layer.spacing
    if np.any(close):
        warnings.warn(f"{int(close.sum())} {what} point(s) within {factor} mesh spacings "
                      "of a boundary", ProximityWarning, stacklevel=3)
    return close


def layer_potential(layer: LayerDensity, k, points) -> np.ndarray:
    k = _check_k(k)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    diff = points[:, None, :] - layer.points[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    h0, h1 = hankel_h0_h1(k * r)
    out = np.zeros(len(points), dtype=complex)
    if layer.single is not None:
        out += (0.25j * h0) @ (layer.single * layer.ds)
    if layer.double is not None:
        proj = np.einsum("ijk,jk->ij", diff, layer.normals) / r
        out += (0.25j * k * h1 * proj) @ (layer.double * layer.ds)
    return out


def greens_identity_residual(boundary, k, source, probes=None, exterior: Optional[bool] = None):
    """Max error of the Green representation of a point-source field.

    The field ``G_k(x - source)`` is represented from its own Cauchy data on
    ``boundary`` and compared with the exact value at probe points inside the
    subdomain. ``source`` must lie outside the subdomain. Probes closer than
    three mesh spacings to the boundary trigger a :class:`ProximityWarning`.
    """
    k = _check_k(k)
    source = np.asarray(source, dtype=float)
    x = boundary.points
    if exterior is None:
        area = 0.5 * np.sum(x[:, 0] * boundary.d1[:, 1] - x[:, 1] * boundary.d1[:, 0])
        exterior = area < 0
    spacing = float(arc_weights(boundary).max())
    if probes is None:
        c = x.mean(axis=0)
        pick = x[:: max(1, len(x) // 12)]
        probes = c + (2.0 if exterior else 0.5) * (pick - c)
        dist = np.hypot(*(probes[:, None, :] - x[None, :, :]).transpose(2, 0, 1)).min(axis=1)
        keep = dist >= 3 * spacing
        probes = probes[keep] if np.any(keep) else probes[[np.argmax(dist)]]
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    def field(pts):
        d = pts - source
        r = np.hypot(d[:, 0], d[:, 1])
        h0, h1 = hankel_h0_h1(k * r)
        grad = (-0.25j * k * h1 / r)[:, None] * d
        return 0.25j * h0, grad

    u, grad = field(x)
    dn = np.einsum("ij,ij->i", grad, boundary.normals)
    layer = LayerDensity(x, boundary.normals, arc_weights(boundary), dn, -u, spacing)
    _distance_check(probes, layer, 3.0, "probe")
    exact, _ = field(probes)
    approx = layer_potential(layer, k, probes)
    return float(np.max(np.abs(approx - exact)))


# ---------------------------------------------------------------- far field

def directions_from(directions) -> np.ndarray:
    d = np.asarray(directions, dtype=float)
    if d.size == 0:
        raise ValueError("far field needs at least one direction")
    if d.ndim == 1:
        return np.stack([np.cos(d), np.sin(d)], axis=-1)
    return d / np.linalg.norm(d, axis=1)[:, None]


def equispaced_angles(m: int) -> np.ndarray:
    return 2 * np.pi * np.arange(m) / m


def far_field(layers: Sequence[LayerDensity], k0, directions) -> np.ndarray:
    """Far-field pattern of ``sum SL[single] + DL[double]`` at wavenumber k0."""
    k0 = complex(k0)
    if k0.imag != 0 or k0.real <= 0:
        raise ValueError("far field needs a real positive exterior wavenumber")
    k0 = k0.real
    xhat = directions_from(directions)
    c = np.exp(0.25j * np.pi) / np.sqrt(8 * np.pi * k0)
    out = np.zeros(len(xhat), dtype=complex)
    if isinstance(layers, LayerDensity):
        layers = [layers]
    for layer in layers:
        phase = np.exp(-1j * k0 * (xhat @ layer.points.T))
        if layer.single is not None:
            out += phase @ (layer.single * layer.ds)
        if layer.double is not None:
            dl = -1j * k0 * (xhat @ layer.normals.T) * phase
            out += dl @ (layer.double * layer.ds)
    return c * out


def far_field_error(values, reference) -> float:
    """Max discrepancy normalised by the largest reference magnitude."""
    values = np.asarray(values)
    reference = np.asarray(reference)
    if values.shape != reference.shape:
        raise ValueError("far fields sampled at different direction sets")
    return float(np.max(np.abs(values - reference)) / np.max(np.abs(reference)))


def write_far_field_csv(path, angles, values) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["direction_index", "angle", "re", "im", "abs"])
        for i, (a, v) in enumerate(zip(angles, values)):
            wr.writerow([i, repr(float(a)), repr(float(v.real)), repr(float(v.imag)),
                         repr(float(abs(v)))])


def read_far_field_csv(path):
    angles, values = [], []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        for row in rd:
            angles.append(float(row["angle"]))
            values.append(complex(float(row["re"]), float(row["im"])))
    return np.array(angles), np.array(values)


# ---------------------------------------------------------------- near field

def locate(geometry, points) -> np.ndarray:
    """Subdomain index of each point (0 when outside every bounded subdomain).

    Uses even-odd ray casting against the node polygons; points on a cut line
    go to the lowest index that claims them.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    owner = np.zeros(len(points), dtype=int)
    for b in geometry.boundaries[1:]:
        poly = _order_polygon(b)
        inside = _in_polygon(points, poly)
        owner[(owner == 0) & inside] = b.index
    return owner


def _order_polygon(b):
    pts = []
    for a, arc in enumerate(b.arcs):
        pts.append(arc.endpoints()[0][None, :])
        pts.append(b.points[a * b.n_per_arc:(a + 1) * b.n_per_arc])
    return np.vstack(pts)


def _in_polygon(points, poly):
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    xs, ys = poly[:, 0], poly[:, 1]
    xe, ye = np.roll(xs, -1), np.roll(ys, -1)
    for x0, y0, x1, y1 in zip(xs, ys, xe, ye):
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xint)
    return inside


def near_field(layers_by_subdomain: dict, wavenumbers, points, membership, incident=None):
    """Evaluate the field at points, each with the layers and wavenumber of its
    subdomain. ``incident`` (a callable on points) is added in subdomain 0.

    Returns ``(values, flagged)``; flagged points lie within two mesh
    spacings of a boundary where the trapezoid sums lose accuracy.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    membership = np.asarray(membership)
    values = np.zeros(len(points), dtype=complex)
    flagged = np.zeros(len(points), dtype=bool)
    for j, layers in layers_by_subdomain.items():
        sel = membership == j
        if not np.any(sel):
            continue
        pts = points[sel]
        acc = np.zeros(len(pts), dtype=complex)
        close = np.zeros(len(pts), dtype=bool)
        for layer in (layers if isinstance(layers, (list, tuple)) else [layers]):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ProximityWarning)
                close |= _distance_check(pts, layer, 2.0, "near-field")
            acc += layer_potential(layer, wavenumbers[j], pts)
        if j == 0 and incident is not None:
            acc += incident(pts)
        values[sel] = acc
        flagged[sel] = close
    if np.any(flagged):
        warnings.warn(f"{int(flagged.sum())} near-field point(s) within 2 mesh spacings of a "
                      "boundary", ProximityWarning, stacklevel=2)
    return values, flagged


def write_near_field_csv(path, points, membership, values) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "subdomain", "re", "im"])
        for p, j, v in zip(points, membership, values):
            wr.writerow([repr(float(p[0])), repr(float(p[1])), int(j), repr(float(v.real)),
                         repr(float(v.imag))])


class OperatorCache:
    """Per-(boundary, wavenumber) kernel objects reused across assemblies."""

    def __init__(self):
        self._store = {}

    def get(self, boundary, k) -> BoundaryKernels:
        key = (id(boundary), complex(k))
        hit = self._store.get(key)
        if hit is None or hit.b is not boundary:
            hit = BoundaryKernels(boundary, k)
            self._store[key] = hit
        return hit

    def matrix(self, boundary, k, kind: BioKind) -> np.ndarray:
        return self.get(boundary, k).matrix(kind)

    def ndiff(self, boundary, k_plus, k_minus) -> np.ndarray:
        key = ("ndiff", id(boundary), complex(k_plus), complex(k_minus))
        hit = self._store.get(key)
        if hit is None:
            hit = hypersingular_difference(boundary, k_plus, k_minus)
            self._store[key] = hit
        return hit


def point_kernels(targets, target_normals, sources, source_normals, k):
    """Plain kernel values between disjoint point sets:
    G, d/dn_y G, d/dn_x G and d^2/dn_x dn_y G (unit normals)."""
    k = _check_k(k)
    diff = targets[:, None, :] - sources[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    if np.any(r == 0):
        raise ValueError("point kernels need disjoint point sets")
    zhat = diff / r[..., None]
    h0, h1 = hankel_h0_h1(k * r)
    a = np.einsum("ijk,ik->ij", zhat, target_normals)
    b = np.einsum("ijk,jk->ij", zhat, source_normals)
    nn = target_normals @ source_normals.T
    g = 0.25j * h0
    dny = 0.25j * k * h1 * b
    dnx = -0.25j * k * h1 * a
    hyp = 0.25j * k ** 2 * h0 * a * b + 0.25j * k * h1 / r * (nn - 2 * a * b)
    return g, dny, dnx, hyp
