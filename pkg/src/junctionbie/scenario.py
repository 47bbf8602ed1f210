"""Problem definition: frequency, media, geometry selection and solver knobs."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
try:
    import tomllib as tomli
except ModuleNotFoundError:  # python < 3.11
    import tomli

GEOMETRY_KINDS = (
    "three_subdomain_halfdisks",
    "five_subdomain_quadrants",
    "single_disk",
    "custom",
)

# sigmoid degree used when a run does not pin one explicitly
DEFAULT_DEGREE = 3
DEFAULT_DEGREE_GMTF = 4


class ScenarioError(ValueError):
    """Invalid or incomplete scenario description."""


@dataclass(frozen=True)
class Medium:
    epsilon: float
    wavenumber: float


@dataclass(frozen=True)
class CauchyTrace:
    """Dirichlet samples and eps-scaled (optionally weighted) Neumann samples."""

    dirichlet: np.ndarray
    neumann: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.dirichlet, self.neumann])


@dataclass(frozen=True)
class Scenario:
    omega: float
    epsilons: tuple
    geometry_kind: str = "three_subdomain_halfdisks"
    incident_direction: tuple = (1.0, 0.0)
    eta: Optional[float] = None
    sigma_dtnr: float = 0.1
    sigma_gsqr_exponent: float = 1.0 / 3.0
    n: int = 64
    sigmoid_degree: Optional[int] = None
    gmres_tol: float = 1e-4
    gmres_maxit: int = 5000
    n_trunc: int = 40
    farfield_n: int = 1024

    def __post_init__(self):
        _validate(self)

    # derived quantities ------------------------------------------------
    @property
    def wavenumbers(self) -> tuple:
        return tuple(self.omega * np.sqrt(e) for e in self.epsilons)

    @property
    def media(self) -> tuple:
        return tuple(Medium(e, k) for e, k in zip(self.epsilons, self.wavenumbers))

    @property
    def coupling(self) -> float:
        """Robin coupling constant, k0 unless set explicitly."""
        return self.wavenumbers[0] if self.eta is None else self.eta

    @property
    def sigma_gsqr(self) -> tuple:
        return tuple(k ** self.sigma_gsqr_exponent for k in self.wavenumbers)

    @property
    def direction(self) -> np.ndarray:
        d = np.asarray(self.incident_direction, dtype=float)
        return d / np.linalg.norm(d)

    def degree_for(self, formulation: str = "") -> int:
        if self.sigmoid_degree is not None:
            return self.sigmoid_degree
        return DEFAULT_DEGREE_GMTF if formulation.startswith("gmtf") else DEFAULT_DEGREE

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    # serialisation -----------------------------------------------------
    def to_config(self) -> str:
        values = {
            "omega": self.omega,
            "epsilons": list(self.epsilons),
            "geometry": self.geometry_kind,
            "incident": list(self.incident_direction),
            "eta": self.eta,
            "sigma_dtnr": self.sigma_dtnr,
            "sigma_gsqr_exponent": self.sigma_gsqr_exponent,
            "n": self.n,
            "sigmoid_degree": self.sigmoid_degree,
            "gmres_tol": self.gmres_tol,
            "gmres_maxit": self.gmres_maxit,
            "n_trunc": self.n_trunc,
            "farfield_n": self.farfield_n,
        }
        lines = [f"{key} = {_toml_value(val)}" for key, val in values.items() if val is not None]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_config().encode()).hexdigest()[:16]


def _toml_value(val) -> str:
    if isinstance(val, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in val) + "]"
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    if isinstance(val, (float, np.floating)):
        return repr(float(val))
    return json.dumps(str(val))


def _validate(s: Scenario) -> None:
    if not (np.isfinite(s.omega) and s.omega > 0):
        raise ScenarioError(f"omega must be positive, got {s.omega!r}")
    if len(s.epsilons) < 2:
        raise ScenarioError("epsilons needs the exterior value and at least one interior value")
    for j, e in enumerate(s.epsilons):
        if isinstance(e, complex) or not np.isreal(e):
            raise ScenarioError(f"epsilons[{j}] must be a positive real number, got {e!r}")
        if not e > 0:
            raise ScenarioError(f"epsilons[{j}] must be positive, got {e!r}")
    if s.geometry_kind not in GEOMETRY_KINDS:
        raise ScenarioError(
            f"geometry must be one of {', '.join(GEOMETRY_KINDS)}; got {s.geometry_kind!r}")
    expected = {"three_subdomain_halfdisks": 3, "five_subdomain_quadrants": 5, "single_disk": 2}
    if s.geometry_kind in expected and len(s.epsilons) != expected[s.geometry_kind]:
        raise ScenarioError(
            f"epsilons has {len(s.epsilons)} entries but {s.geometry_kind} needs "
            f"{expected[s.geometry_kind]}")
    if len(s.incident_direction) != 2 or np.linalg.norm(s.incident_direction) == 0:
        raise ScenarioError("incident must be a nonzero 2-vector")
    if s.eta is not None and not s.eta > 0:
        raise ScenarioError(f"eta must be positive, got {s.eta!r}")
    if int(s.n) != s.n or s.n < 2 or s.n % 2:
        raise ScenarioError(f"n must be an even integer >= 2, got {s.n!r}")
    if s.sigmoid_degree is not None and s.sigmoid_degree < 2:
        raise ScenarioError(f"sigmoid_degree must be >= 2, got {s.sigmoid_degree!r}")
    if not s.gmres_tol > 0:
        raise ScenarioError("gmres_tol must be positive")
    if s.gmres_maxit < 1:
        raise ScenarioError("gmres_maxit must be >= 1")
    if s.n_trunc < 0:
        raise ScenarioError("n_trunc must be >= 0")
    if s.farfield_n < 1:
        raise ScenarioError("farfield_n must be >= 1")
    if not s.sigma_dtnr >= 0:
        raise ScenarioError("sigma_dtnr must be non-negative")


_KEYMAP = {
    "omega": "omega",
    "epsilons": "epsilons",
    "geometry": "geometry_kind",
    "incident": "incident_direction",
    "eta": "eta",
    "sigma_dtnr": "sigma_dtnr",
    "sigma_gsqr_exponent": "sigma_gsqr_exponent",
    "n": "n",
    "sigmoid_degree": "sigmoid_degree",
    "gmres_tol": "gmres_tol",
    "gmres_maxit": "gmres_maxit",
    "n_trunc": "n_trunc",
    "farfield_n": "farfield_n",
}


def load_scenario(source: str) -> Scenario:
    """Parse a flat ``key = value`` config document into a validated Scenario."""
    try:
        raw = tomli.loads(source)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"config does not parse: {exc}") from exc
    unknown = set(raw) - set(_KEYMAP)
    if unknown:
        raise ScenarioError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for required in ("omega", "epsilons"):
        if required not in raw:
            raise ScenarioError(f"missing required field {required!r}")
    kwargs = {_KEYMAP[k]: v for k, v in raw.items()}
    for key in ("epsilons", "incident_direction"):
        if key in kwargs:
            if not isinstance(kwargs[key], list):
                raise ScenarioError(f"{key} must be a list")
            kwargs[key] = tuple(kwargs[key])
    return Scenario(**kwargs)


def load_scenario_file(path) -> Scenario:
    return load_scenario(Path(path).read_text())


def plane_wave(s: Scenario, points):
    """u_inc = exp(i k0 d.x) and its gradient at the given points."""
    points = np.asarray(points, dtype=float)
    k0 = s.wavenumbers[0]
    d = s.direction
    u = np.exp(1j * k0 * (points @ d))
    grad = 1j * k0 * u[:, None] * d[None, :]
    return u, grad


def plane_wave_trace(s: Scenario, boundary, weighted: bool = True) -> CauchyTrace:
    """Dirichlet and eps0^{-1}-scaled Neumann traces of the incident wave on ``boundary``."""
    if boundary.points is None or len(boundary.points) == 0:
        raise ScenarioError("boundary mesh has not been built")
    u, grad = plane_wave(s, boundary.points)
    dn = np.einsum("ij,ij->i", grad, boundary.normals) / s.epsilons[0]
    if weighted:
        dn = dn * boundary.weights
    return CauchyTrace(u, dn)
