"""Command-line driver: ``junctionbie run ...`` and ``junctionbie reference ...``."""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import ddm, gmtf, mtf, oned
from .bio import (LayerDensity, OperatorCache, equispaced_angles, far_field_error, locate,
                  near_field, read_far_field_csv, write_far_field_csv, write_near_field_csv)
from .geometry import GeometryError
from .numerics import GmresReport, SingularMatrixError, dense_solve, gmres
from .scenario import Scenario, ScenarioError, load_scenario_file, plane_wave

EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_SINGULAR = 4

FORMULATIONS = ("mtf", "mtf-calderon", "mtf-schur", "gmtf", "ddm", "ddm-schur", "ddm-neumann",
                "ddm-dtnr", "ddm-gsqr", "oned", "oned-dtn", "oned-sweep")

PRESETS = {
    "three-high": dict(geometry_kind="three_subdomain_halfdisks", epsilons=(1.0, 64.0, 256.0)),
    "three-low": dict(geometry_kind="three_subdomain_halfdisks", epsilons=(1.0, 4.0, 16.0)),
    "five-high": dict(geometry_kind="five_subdomain_quadrants",
                      epsilons=(1.0, 64.0, 256.0, 1024.0, 4096.0)),
    "five-low": dict(geometry_kind="five_subdomain_quadrants",
                     epsilons=(1.0, 4.0, 16.0, 64.0, 256.0)),
    "single-disk": dict(geometry_kind="single_disk", epsilons=(1.0, 4.0)),
}
ONED_PRESETS = {"paper-fig-eig": oned.fig_eig_preset}

# (preset, [(omega, n, n_trunc)], columns)
_FULL = ("ddm", "ddm-dtnr", "ddm-gsqr", "ddm-schur", "ddm-neumann",
         "mtf", "mtf-calderon", "mtf-schur", "gmtf")
TABLES = {
    1: ("three-high", [(1.0, 64, 40), (2.0, 128, 80), (4.0, 256, 80)], _FULL),
    2: ("five-high", [(1.0, 288, 160), (2.0, 288, 160)], _FULL),
    3: ("three-low", [(4.0, 64, 20), (8.0, 128, 20), (16.0, 256, 30), (32.0, 512, 80)], _FULL),
    4: ("five-low", [(4.0, 72, 80), (8.0, 144, 80), (16.0, 288, 160)], _FULL),
    5: ("three-low", [(2.0, 32, 40), (2.0, 64, 40)],
        ("ddm", "ddm-schur", "mtf", "mtf-calderon", "mtf-schur", "gmtf")),
    6: ("three-high", [(1.0, 64, 40), (2.0, 128, 80), (4.0, 256, 80)], ("robin-per-subdomain",)),
}
TABLE6_LOW = [(4.0, 64, 20), (8.0, 128, 20), (16.0, 256, 30), (32.0, 512, 80)]


class NonConvergence(RuntimeError):
    pass


@dataclass
class RunResult:
    formulation: str
    iterations: int
    converged: bool
    report: Optional[GmresReport]
    far_field: Optional[Callable] = None
    layers: Optional[dict] = None        # subdomain -> list of LayerDensity
    extra: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    scenario_hash: str
    formulation: str
    outputs: list
    iterations: int
    error: Optional[float]
    wall_time: float
    parameters: dict = field(default_factory=dict)

    def write(self, path) -> None:
        lines = [f"scenario_hash={self.scenario_hash}", f"formulation={self.formulation}",
                 f"iterations={self.iterations}",
                 f"eps_inf={'' if self.error is None else repr(self.error)}",
                 f"wall_time={self.wall_time:.3f}"]
        lines += [f"{k}={v}" for k, v in self.parameters.items()]
        lines += [f"output={o}" for o in self.outputs]
        Path(path).write_text("\n".join(lines) + "\n")


def _boundary_layers(geometry, scenario, traces) -> dict:
    """Green representation densities per subdomain from (u, eps^{-1} w du/dn)."""
    out = {}
    for j, (u, neu) in enumerate(traces):
        b = geometry.boundaries[j]
        out[j] = [LayerDensity.on_boundary(b, scenario.epsilons[j] * np.asarray(neu), -np.asarray(u))]
    return out


def solve_formulation(s: Scenario, formulation: str, cache: Optional[OperatorCache] = None) -> RunResult:
    if formulation.startswith("mtf"):
        variant = {"mtf": "plain", "mtf-calderon": "calderon", "mtf-schur": "schur"}[formulation]
        system = mtf.assemble_mtf(s)
        sol = mtf.solve_mtf(system, variant)
        traces = [(t.dirichlet, t.neumann) for t in sol.traces]
        return RunResult(formulation, sol.report.iterations, sol.report.converged, sol.report,
                         sol.far_field, _boundary_layers(system.geometry, s, traces))
    if formulation == "gmtf":
        system = gmtf.assemble_gmtf(s, cache=cache)
        sol = gmtf.solve_gmtf(system)
        layers = {m: sol.layers(m) for m in range(len(s.epsilons))}
        return RunResult(formulation, sol.report.iterations, sol.report.converged, sol.report,
                         sol.far_field, layers)
    if formulation.startswith("ddm"):
        variant = {"ddm-dtnr": "dtnr", "ddm-gsqr": "gsqr"}.get(formulation, "classical")
        system = ddm.assemble_ddm(s, formulation=variant, cache=cache)
        if formulation in ("ddm-schur", "ddm-neumann"):
            n_trunc = s.n_trunc if formulation == "ddm-neumann" else None
            merged = ddm.schur_eliminate(system, n_trunc=n_trunc)
            sol = ddm.solve_outer(system, merged)
        else:
            sol = ddm.solve_ddm_iterative(system)
        n = len(system.geometry.boundaries)
        traces = [sol.traces(j) for j in range(n)]
        return RunResult(formulation, sol.iterations, sol.report.converged, sol.report,
                         sol.far_field, _boundary_layers(system.geometry, s, traces),
                         {"system": system, "solution": sol})
    raise ScenarioError(f"formulation {formulation!r} is not a 2D formulation")


def make_reference(s: Scenario, n_fine: int, path=None, directions: Optional[int] = None):
    """Fine-grid MTF far field solved with dense LU; optionally written as CSV."""
    if n_fine < 2 * s.n:
        raise ScenarioError(f"reference n={n_fine} must be at least twice the production n={s.n}")
    fine = s.replace(n=n_fine)
    system = mtf.assemble_mtf(fine)
    x = dense_solve(system.matrix, system.rhs)
    sol = mtf.MtfSolution(mtf._to_traces(system, x), None, system, "direct")
    angles = equispaced_angles(directions or s.farfield_n)
    values = sol.far_field(angles)
    if path is not None:
        write_far_field_csv(path, angles, values)
    return angles, values


def parse_gridspec(spec: str) -> np.ndarray:
    """``xmin:xmax:nx,ymin:ymax:ny`` -> (nx*ny, 2) points."""
    try:
        xs, ys = spec.split(",")
        x0, x1, nx = xs.split(":")
        y0, y1, ny = ys.split(":")
        gx = np.linspace(float(x0), float(x1), int(nx))
        gy = np.linspace(float(y0), float(y1), int(ny))
    except ValueError as exc:
        raise ScenarioError(f"bad grid spec {spec!r}; expected xmin:xmax:nx,ymin:ymax:ny") from exc
    xx, yy = np.meshgrid(gx, gy)
    return np.column_stack([xx.ravel(), yy.ravel()])


def _scenario_from_args(args) -> Scenario:
    if args.scenario:
        s = load_scenario_file(args.scenario)
    elif args.preset in PRESETS:
        s = Scenario(omega=1.0, **PRESETS[args.preset])
    elif args.preset:
        raise ScenarioError(f"unknown preset {args.preset!r}")
    else:
        raise ScenarioError("give --scenario or --preset")
    changes = {}
    if args.n is not None:
        changes["n"] = args.n
    if args.omega is not None:
        changes["omega"] = args.omega
    if args.epsilons is not None:
        changes["epsilons"] = tuple(float(v) for v in args.epsilons.split(","))
    if args.ntrunc is not None:
        changes["n_trunc"] = args.ntrunc
    if args.gmres_tol is not None:
        changes["gmres_tol"] = args.gmres_tol
    return s.replace(**changes) if changes else s


def _run_oned(args, out: Path) -> RunManifest:
    t0 = time.perf_counter()
    preset = args.preset or "paper-fig-eig"
    if preset not in ONED_PRESETS:
        raise ScenarioError(f"unknown 1D preset {preset!r}; available: {', '.join(ONED_PRESETS)}")
    pb = ONED_PRESETS[preset]()
    tol = args.gmres_tol if args.gmres_tol is not None else 1e-4
    outputs = []
    if args.formulation == "oned-sweep":
        inv = oned.sweep_inverse(oned.assemble_1d(pb, "dtn"))
        classical = oned.assemble_1d(pb, "classical")
        matrix, rhs = inv @ classical.matrix, inv @ classical.rhs
        exact_layout = "classical"
    else:
        variant = "classical" if args.formulation == "oned" else "dtn"
        system = oned.assemble_1d(pb, variant)
        matrix, rhs = system.matrix, system.rhs
        exact_layout = variant
    report = gmres(matrix, rhs, tol=tol, maxit=matrix.shape[0])
    _, _, exact = oned.transfer_matrix_oracle(pb, exact_layout)
    err = float(np.abs(report.solution - exact).max() / np.abs(exact).max())
    report.to_csv(out / "iterations.csv")
    outputs.append("iterations.csv")
    if args.dump_eigenvalues:
        oned.write_eigenvalues_csv(out / "eigenvalues.csv", np.linalg.eigvals(matrix), args.formulation)
        outputs.append("eigenvalues.csv")
    print(f"iterations={report.iterations} converged={report.converged} "
          f"relative_error_vs_transfer_matrix={err:.3e}")
    return RunManifest(f"oned:{preset}", args.formulation, outputs, report.iterations, None,
                       time.perf_counter() - t0,
                       {"intervals": pb.n_intervals, "unknowns": pb.n_unknowns, "eta": pb.eta,
                        "gmres_tol": tol, "converged": report.converged})


def _manifest_params(s: Scenario) -> dict:
    return {"n": s.n, "omega": s.omega, "epsilons": [float(v) for v in s.epsilons], "eta": float(s.coupling),
            "sigma_dtnr": s.sigma_dtnr, "sigma_gsqr": [float(v) for v in s.sigma_gsqr], "n_trunc": s.n_trunc,
            "gmres_tol": s.gmres_tol, "geometry": s.geometry_kind}


def _run_2d(args, out: Path) -> tuple:
    t0 = time.perf_counter()
    s = _scenario_from_args(args)
    res = solve_formulation(s, args.formulation)
    outputs = []
    if res.report is not None:
        res.report.to_csv(out / "iterations.csv")
        outputs.append("iterations.csv")
    if args.reference:
        angles, ref = read_far_field_csv(args.reference)
    else:
        angles, ref = equispaced_angles(s.farfield_n), None
    values = res.far_field(angles)
    write_far_field_csv(out / "farfield.csv", angles, values)
    outputs.append("farfield.csv")
    err = None if ref is None else far_field_error(values, ref)
    if args.dump_nearfield:
        pts = parse_gridspec(args.dump_nearfield)
        geometry = res.extra["system"].geometry if "system" in res.extra else None
        if geometry is None:
            from .geometry import build_geometry
            geometry = build_geometry(s, args.formulation)
        member = locate(geometry, pts)

        def incident(p):
            return plane_wave(s, p)[0]

        vals, _ = near_field(res.layers, s.wavenumbers, pts, member, incident)
        write_near_field_csv(out / "nearfield.csv", pts, member, vals)
        outputs.append("nearfield.csv")
    line = f"iterations={res.iterations} converged={res.converged}"
    if err is not None:
        line += f" eps_inf={err:.3e}"
    print(line)
    man = RunManifest(s.digest(), args.formulation, outputs, res.iterations, err,
                      time.perf_counter() - t0, _manifest_params(s))
    return man, res.converged


def robin_iterations(system: ddm.DdmSystem, tol: float = 1e-4) -> list:
    """GMRES counts of each subdomain's regularized Robin equation at the DDM solution data."""
    data = ddm.solve_ddm_direct(system).data
    counts = []
    for j, solver in enumerate(system.solvers):
        psi = data[system.positions[j]]
        rhs = solver.system @ (solver.trace @ psi)
        counts.append(gmres(solver.system, rhs, tol=tol, maxit=4 * len(psi)).iterations)
    return counts


def run_table(table: int, out: Path, n_override: Optional[int] = None,
              omegas: Optional[list] = None, reference_factor: int = 2) -> Path:
    preset, rows, columns = TABLES[table]
    if table == 6:
        rows = [("three-high",) + r for r in rows] + [("three-low",) + r for r in TABLE6_LOW]
    else:
        rows = [(preset,) + r for r in rows]
    path = out / f"table{table}.csv"
    with open(path, "w") as fh:
        if table == 6:
            fh.write("preset,omega,n,it_omega0,it_omega1,it_omega2,it_ddm,it_dtnr,it_gsqr\n")
        else:
            fh.write("omega,n,n_trunc," + ",".join(f"it_{c},eps_{c}" for c in columns) + "\n")
        for name, omega, n, n_trunc in rows:
            if omegas and omega not in omegas:
                continue
            n = n_override or n
            s = Scenario(omega=omega, n=n, n_trunc=n_trunc, **PRESETS[name])
            cache = OperatorCache()
            if table == 6:
                system = ddm.assemble_ddm(s, cache=cache)
                counts = robin_iterations(system)
                its = [solve_formulation(s, f, cache).iterations for f in ("ddm", "ddm-dtnr", "ddm-gsqr")]
                fh.write(f"{name},{omega},{n}," + ",".join(map(str, counts + its)) + "\n")
                print(name, omega, n, counts, its)
                continue
            angles, ref = make_reference(s, reference_factor * n)
            cells = []
            for c in columns:
                res = solve_formulation(s, c, cache)
                e = far_field_error(res.far_field(angles), ref)
                cells += [str(res.iterations), f"{e:.3e}"]
                print(f"table {table} omega={omega} n={n} {c}: it={res.iterations} eps_inf={e:.2e}")
            fh.write(f"{omega},{n},{n_trunc}," + ",".join(cells) + "\n")
            fh.flush()
    return path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="junctionbie")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve one scenario or reproduce a results table")
    r.add_argument("--scenario", type=str)
    r.add_argument("--preset", type=str)
    r.add_argument("--formulation", choices=FORMULATIONS, default="ddm")
    r.add_argument("--n", type=int)
    r.add_argument("--omega", type=float)
    r.add_argument("--epsilons", type=str, help="comma separated, exterior first")
    r.add_argument("--reference", type=str, help="far-field CSV to measure eps_inf against")
    r.add_argument("--dump-eigenvalues", action="store_true")
    r.add_argument("--dump-nearfield", type=str, metavar="GRIDSPEC")
    r.add_argument("--table", type=int, choices=sorted(TABLES))
    r.add_argument("--table-omegas", type=str, help="restrict a table run to these omegas")
    r.add_argument("--ntrunc", type=int)
    r.add_argument("--gmres-tol", type=float)
    r.add_argument("--out", type=str, default=".")
    ref = sub.add_parser("reference", help="write a fine MTF far field for eps_inf")
    ref.add_argument("--scenario", type=str)
    ref.add_argument("--preset", type=str)
    ref.add_argument("--n", type=int)
    ref.add_argument("--omega", type=float)
    ref.add_argument("--epsilons", type=str)
    ref.add_argument("--ntrunc", type=int)
    ref.add_argument("--gmres-tol", type=float)
    ref.add_argument("--fine-n", type=int, required=True)
    ref.add_argument("--output", type=str, default="reference.csv")
    return p


def run(args) -> RunManifest:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.table is not None:
        t0 = time.perf_counter()
        omegas = [float(v) for v in args.table_omegas.split(",")] if args.table_omegas else None
        path = run_table(args.table, out, args.n, omegas)
        man = RunManifest(f"table{args.table}", "table", [path.name], 0, None,
                          time.perf_counter() - t0, {"table": args.table, "n_override": args.n})
        man.write(out / "manifest.txt")
        return man
    if args.formulation.startswith("oned"):
        man = _run_oned(args, out)
        converged = man.parameters["converged"]
    else:
        man, converged = _run_2d(args, out)
    man.outputs.append("manifest.txt")
    man.write(out / "manifest.txt")
    if not converged:
        raise NonConvergence(f"GMRES did not reach the tolerance in {man.iterations} iterations")
    return man


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reference":
            s = _scenario_from_args(args)
            make_reference(s, args.fine_n, args.output)
            print(f"wrote {args.output}")
            return 0
        run(args)
        return 0
    except (ScenarioError, GeometryError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergence, ddm.ConvergenceError) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (SingularMatrixError, oned.ResonanceError, np.linalg.LinAlgError) as exc:
        print(f"numerical singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
