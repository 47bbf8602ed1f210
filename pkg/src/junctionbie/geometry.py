"""Subdomain boundaries with graded meshes, interface bookkeeping and trace exchange.

Every subdomain boundary is a closed curve made of analytic arcs. Bounded
subdomains are traversed counterclockwise and the exterior one clockwise, so
the normal ``(x2', -x1')/|x'|`` always points out of the subdomain. Each arc
carries a polynomial sigmoid grading so that derivatives vanish at corners;
nodes sit at half steps and never touch a corner or junction.

Weights. The weight attached to a node is ``|dx/dt|`` for a parametrisation in
which every arc spans a parameter interval of length ``2*pi/A_ref`` where
``A_ref`` is the number of arcs of the exterior boundary. For the preset
geometries this is the ``[0, 2*pi]`` parametrisation of the exterior boundary,
and the weights agree node for node on both sides of every interface.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .scenario import Scenario, ScenarioError


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------- sigmoid grading

def _sigmoid_parts(s, p):
    s = np.asarray(s, dtype=float)
    c = 1.0 / p - 0.5
    v = c * (1 - 2 * s) ** 3 + (2 * s - 1) / p + 0.5
    dv = -6 * c * (1 - 2 * s) ** 2 + 2.0 / p
    ddv = 24 * c * (1 - 2 * s)
    return v, dv, ddv


def sigmoid_node(s, p: int):
    """Polynomial-ratio graded map of [0, 1] onto itself.

    ``w(s) = v^p / (v^p + (1-v)^p)`` with a cubic ``v``; the first ``p-1``
    derivatives vanish at both endpoints and ``w(1-s) = 1 - w(s)``.
    """
    if p < 2:
        raise ValueError(f"sigmoid degree must be >= 2, got {p}")
    return sigmoid_derivatives(s, p)[0]


def sigmoid_derivatives(s, p: int):
    """Return w, w', w'' of the graded map."""
    if p < 2:
        raise ValueError(f"sigmoid degree must be >= 2, got {p}")
    v, dv, ddv = _sigmoid_parts(s, p)
    a = v ** p
    b = (1 - v) ** p
    den = a + b
    w = a / den
    prod = v * (1 - v)
    g1 = p * prod ** (p - 1) / den ** 2
    dden = p * (v ** (p - 1) - (1 - v) ** (p - 1))
    g2 = p * prod ** (p - 2) * ((p - 1) * (1 - 2 * v) * den - 2 * prod * dden) / den ** 3
    return w, g1 * dv, g2 * dv ** 2 + g1 * ddv


# ---------------------------------------------------------------- arcs

@dataclass(frozen=True)
class Arc:
    """Analytic arc on tau in [0, 1]: circular (center, radius, angles) or straight."""

    kind: str
    a: tuple
    b: tuple
    radius: float = 0.0
    start_label: str = ""
    end_label: str = ""

    @staticmethod
    def circle(center, radius, theta0, theta1, start_label="", end_label=""):
        return Arc("circle", tuple(center), (theta0, theta1), radius, start_label, end_label)

    @staticmethod
    def segment(p0, p1, start_label="", end_label=""):
        return Arc("segment", tuple(p0), tuple(p1), 0.0, start_label, end_label)

    def reversed(self) -> "Arc":
        if self.kind == "circle":
            return Arc("circle", self.a, (self.b[1], self.b[0]), self.radius,
                       self.end_label, self.start_label)
        return Arc("segment", self.b, self.a, 0.0, self.end_label, self.start_label)

    def evaluate(self, tau):
        """Points, first and second tau-derivatives."""
        tau = np.asarray(tau, dtype=float)
        if self.kind == "circle":
            th0, th1 = self.b
            span = th1 - th0
            th = th0 + span * tau
            c, s = np.cos(th), np.sin(th)
            r = self.radius
            x = np.stack([self.a[0] + r * c, self.a[1] + r * s], axis=-1)
            d1 = np.stack([-r * s * span, r * c * span], axis=-1)
            d2 = np.stack([-r * c * span ** 2, -r * s * span ** 2], axis=-1)
            return x, d1, d2
        p0 = np.asarray(self.a, dtype=float)
        p1 = np.asarray(self.b, dtype=float)
        x = p0[None, :] + tau[:, None] * (p1 - p0)[None, :]
        d1 = np.broadcast_to(p1 - p0, x.shape).copy()
        return x, d1, np.zeros_like(x)

    def endpoints(self):
        x, _, _ = self.evaluate(np.array([0.0, 1.0]))
        return x[0], x[1]


# ---------------------------------------------------------------- boundaries

@dataclass
class SubdomainBoundary:
    index: int
    arcs: list
    neighbors: list
    n_per_arc: int
    degree: int
    graded: bool = True
    arc_reference: int = 0
    t: np.ndarray = None
    points: np.ndarray = None
    d1: np.ndarray = None
    d2: np.ndarray = None
    normals: np.ndarray = None
    weights: np.ndarray = None
    segments: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.arcs) * self.n_per_arc

    @property
    def speed(self) -> np.ndarray:
        """|dx/dt| in the boundary's own [0, 2*pi] parametrisation."""
        return np.hypot(self.d1[:, 0], self.d1[:, 1])

    @property
    def weight_ratio(self) -> float:
        """Constant ratio weights / speed."""
        return self.arc_reference / len(self.arcs) if self.arc_reference else 1.0

    @property
    def nu(self) -> np.ndarray:
        """Unnormalised normal (x2', -x1') = |x'| n."""
        return np.stack([self.d1[:, 1], -self.d1[:, 0]], axis=-1)

    def interface_slice(self, neighbor: int) -> slice:
        try:
            return self.segments[neighbor]
        except KeyError:
            raise GeometryError(f"subdomain {self.index} has no interface with {neighbor}") from None


def build_boundary(index, arcs, neighbors, n_per_arc, degree, arc_reference=None) -> SubdomainBoundary:
    arcs = list(arcs)
    n_arcs = len(arcs)
    for a in range(n_arcs):
        end = arcs[a].endpoints()[1]
        start = arcs[(a + 1) % n_arcs].endpoints()[0]
        if np.linalg.norm(end - start) > 1e-12:
            raise GeometryError(f"boundary of subdomain {index} does not close between arcs {a} "
                                f"and {(a + 1) % n_arcs}")
    if n_per_arc % 2 and n_arcs % 2:
        raise GeometryError("total node count must be even")
    graded = n_arcs > 1
    sig = (np.arange(n_per_arc) + 0.5) / n_per_arc
    if graded:
        w, dw, ddw = sigmoid_derivatives(sig, degree)
    else:
        w, dw, ddw = sig, np.ones_like(sig), np.zeros_like(sig)
    scale = n_arcs / (2 * np.pi)  # d sigma / d t
    xs, d1s, d2s, ts = [], [], [], []
    segments = {}
    for a, arc in enumerate(arcs):
        x, a1, a2 = arc.evaluate(w)
        xs.append(x)
        d1s.append(a1 * dw[:, None] * scale)
        d2s.append((a2 * dw[:, None] ** 2 + a1 * ddw[:, None]) * scale ** 2)
        ts.append((a + sig) / scale)
        nb = neighbors[a]
        if nb in segments:
            raise GeometryError(f"subdomain {index} touches subdomain {nb} along two arcs")
        segments[nb] = slice(a * n_per_arc, (a + 1) * n_per_arc)
    b = SubdomainBoundary(index, arcs, list(neighbors), n_per_arc, degree, graded,
                          arc_reference or n_arcs)
    b.t = np.concatenate(ts)
    b.points = np.concatenate(xs)
    b.d1 = np.concatenate(d1s)
    b.d2 = np.concatenate(d2s)
    sp = b.speed
    b.normals = b.nu / sp[:, None]
    b.weights = sp * b.weight_ratio
    b.segments = segments
    return b


# ---------------------------------------------------------------- skeleton and exchange

@dataclass
class Interface:
    low: int
    high: int
    low_index: np.ndarray   # node positions on the low subdomain boundary
    high_index: np.ndarray  # matching positions on the high subdomain boundary
    points: np.ndarray
    normals: np.ndarray     # unit normals pointing out of the low subdomain
    weights: np.ndarray

    @property
    def key(self):
        return (self.low, self.high)

    @property
    def size(self) -> int:
        return len(self.low_index)


@dataclass
class Skeleton:
    interfaces: list

    @property
    def size(self) -> int:
        return sum(i.size for i in self.interfaces)

    def offsets(self) -> dict:
        out, pos = {}, 0
        for itf in self.interfaces:
            out[itf.key] = slice(pos, pos + itf.size)
            pos += itf.size
        return out

    def find(self, a: int, b: int) -> Interface:
        key = (min(a, b), max(a, b))
        for itf in self.interfaces:
            if itf.key == key:
                return itf
        raise GeometryError(f"no interface between {a} and {b}")


class TraceExchange:
    """Matched index maps between neighbouring subdomain meshes.

    ``pairs[(j, l)] = (idx_j, idx_l)`` lists node positions on boundary j and
    the coincident positions on boundary l, ordered along boundary j.
    """

    def __init__(self, boundaries, pairs):
        self.sizes = {b.index: b.size for b in boundaries}
        self.pairs = pairs

    def restrict(self, j: int, l: int, data_j):
        idx_j, _ = self.pairs[(j, l)]
        return np.asarray(data_j)[idx_j]

    def extend(self, j: int, l: int, interface_data):
        idx_j, _ = self.pairs[(j, l)]
        out = np.zeros(self.sizes[j], dtype=np.result_type(interface_data, float))
        out[idx_j] = interface_data
        return out

    def apply(self, j: int, l: int, data_l):
        """X_{jl}: data on boundary l, restricted to the shared interface and
        extended by zero to boundary j."""
        idx_j, idx_l = self.pairs[(j, l)]
        data_l = np.asarray(data_l)
        out = np.zeros(self.sizes[j], dtype=np.result_type(data_l, float))
        out[idx_j] = data_l[idx_l]
        return out

    def matrix(self, j: int, l: int) -> np.ndarray:
        idx_j, idx_l = self.pairs[(j, l)]
        m = np.zeros((self.sizes[j], self.sizes[l]))
        m[idx_j, idx_l] = 1.0
        return m


@dataclass
class Geometry:
    boundaries: list
    skeleton: Skeleton
    exchange: TraceExchange
    kind: str = "custom"

    def __iter__(self):
        return iter((self.boundaries, self.skeleton, self.exchange))

    @property
    def n_subdomains(self) -> int:
        return len(self.boundaries)

    def neighbors(self, j: int) -> list:
        return list(self.boundaries[j].neighbors)

    def junctions(self) -> np.ndarray:
        pts = []
        for b in self.boundaries:
            if len(b.arcs) < 2:
                continue
            for arc in b.arcs:
                p = arc.endpoints()[0]
                if not any(np.linalg.norm(p - q) < 1e-12 for q in pts):
                    pts.append(p)
        return np.array(pts)

    def ddm_unknowns(self) -> int:
        return sum(b.size for b in self.boundaries)

    def dump_mesh(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["subdomain", "node_index", "t", "x", "y", "weight", "nx", "ny",
                         "interface_label"])
            for b in self.boundaries:
                labels = np.empty(b.size, dtype=object)
                for nb, sl in b.segments.items():
                    labels[sl] = f"{min(b.index, nb)}-{max(b.index, nb)}"
                for m in range(b.size):
                    wr.writerow([b.index, m, repr(b.t[m]), repr(b.points[m, 0]),
                                 repr(b.points[m, 1]), repr(b.weights[m]),
                                 repr(b.normals[m, 0]), repr(b.normals[m, 1]), labels[m]])


def assemble_geometry(boundaries, kind="custom") -> Geometry:
    by_index = {b.index: b for b in boundaries}
    pairs = {}
    interfaces = []
    for b in boundaries:
        for nb, sl in b.segments.items():
            other = by_index.get(nb)
            if other is None:
                raise GeometryError(f"subdomain {b.index} borders unknown subdomain {nb}")
            osl = other.interface_slice(b.index)
            idx = np.arange(sl.start, sl.stop)
            oidx = np.arange(osl.stop - 1, osl.start - 1, -1)
            if len(idx) != len(oidx):
                raise GeometryError(f"meshes on interface {b.index}-{nb} do not match")
            mismatch = np.abs(b.points[idx] - other.points[oidx]).max()
            if mismatch > 1e-12:
                raise GeometryError(f"meshes on interface {b.index}-{nb} do not coincide "
                                    f"(max mismatch {mismatch:.2e})")
            pairs[(b.index, nb)] = (idx, oidx)
            if b.index < nb:
                interfaces.append(Interface(b.index, nb, idx, oidx, b.points[idx],
                                            b.normals[idx], b.weights[idx]))
    interfaces.sort(key=lambda i: (i.low, i.high))
    ordered = [by_index[j] for j in sorted(by_index)]
    return Geometry(ordered, Skeleton(interfaces), TraceExchange(ordered, pairs), kind)


# ---------------------------------------------------------------- presets

def _three_subdomain(n, p):
    up = Arc.circle((0, 0), 1.0, 0.0, np.pi, "R", "L")
    lo = Arc.circle((0, 0), 1.0, np.pi, 2 * np.pi, "L", "R")
    dia = Arc.segment((-1.0, 0.0), (1.0, 0.0), "L", "R")
    b0 = build_boundary(0, [up.reversed(), lo.reversed()], [1, 2], n, p)
    b1 = build_boundary(1, [up, dia], [0, 2], n, p)
    b2 = build_boundary(2, [lo, dia.reversed()], [0, 1], n, p)
    return [b0, b1, b2]


def _five_subdomain(n, p):
    # quadrants: 1 upper right, 2 upper left, 3 lower left, 4 lower right
    arcs = [Arc.circle((0, 0), 1.0, q * np.pi / 2, (q + 1) * np.pi / 2) for q in range(4)]
    o = (0.0, 0.0)
    e = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
    # radius toward e[q] is shared by quadrant q (on its start side) and q-1
    bounded = []
    for q in range(4):
        j = q + 1
        nxt = (q + 1) % 4 + 1
        prv = (q - 1) % 4 + 1
        side_in = Arc.segment(e[(q + 1) % 4], o)
        side_out = Arc.segment(o, e[q])
        bounded.append(build_boundary(j, [arcs[q], side_in, side_out], [0, nxt, prv], n, p,
                                      arc_reference=4))
    ext = build_boundary(0, [arcs[q].reversed() for q in (3, 2, 1, 0)], [4, 3, 2, 1], n, p)
    return [ext] + bounded


def _single_disk(n, p):
    circ = Arc.circle((0, 0), 1.0, 0.0, 2 * np.pi)
    b0 = build_boundary(0, [circ.reversed()], [1], n, p)
    b1 = build_boundary(1, [circ], [0], n, p)
    return [b0, b1]


def build_geometry(s: Scenario, formulation: str = "", custom: Optional[list] = None,
                   degree: Optional[int] = None) -> Geometry:
    """Boundaries, skeleton and exchange maps for the scenario's geometry."""
    n = s.n
    if n % 2:
        raise GeometryError("n must be even")
    p = degree if degree is not None else s.degree_for(formulation)
    kind = s.geometry_kind
    if kind == "three_subdomain_halfdisks":
        bds = _three_subdomain(n, p)
    elif kind == "five_subdomain_quadrants":
        bds = _five_subdomain(n, p)
    elif kind == "single_disk":
        bds = _single_disk(n, p)
    elif kind == "custom":
        if not custom:
            raise GeometryError("custom geometry needs a list of (arcs, neighbors) per subdomain")
        ref = len(custom[0][0])
        bds = [build_boundary(j, arcs, nbs, n, p, arc_reference=ref)
               for j, (arcs, nbs) in enumerate(custom)]
    else:  # pragma: no cover - guarded by scenario validation
        raise ScenarioError(f"unknown geometry {kind}")
    return assemble_geometry(bds, kind)


def five_subdomain_order() -> list:
    """Robin unknown ordering used by hierarchical elimination on quadrants."""
    return [(1, 2), (2, 1), (3, 4), (4, 3), (2, 3), (1, 4), (3, 2), (4, 1),
            (1, 0), (2, 0), (3, 0), (4, 0), (0, None)]
