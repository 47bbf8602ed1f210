import numpy as np
import pytest

from junctionbie.bio import equispaced_angles, far_field_error
from junctionbie.ddm import (EXTERIOR, assemble_ddm, default_layout, interface_pair_maps, neumann_merge,
                             residual, schur_eliminate, solve_ddm_direct, solve_ddm_iterative,
                             solve_outer, spectral_radius)
from junctionbie.mtf import assemble_mtf, solve_mtf
from junctionbie.numerics import smallest_singular_value
from junctionbie.scenario import Scenario, plane_wave


@pytest.fixture(scope="module")
def small():
    s = Scenario(omega=1.0, epsilons=(1.0, 64.0, 256.0), n=32, gmres_tol=1e-10)
    return s, assemble_ddm(s)


def test_layout_three_subdomains(small):
    _, sy = small
    assert sy.layout == [(1, 2), (2, 1), (1, 0), (2, 0), EXTERIOR]
    assert sy.size == sy.geometry.ddm_unknowns()
    assert assemble_mtf(sy.scenario).size == 2 * sy.size


def test_no_contrast_reproduces_incident_field():
    s = Scenario(omega=2.0, epsilons=(1.0, 1.0, 1.0), n=128, sigmoid_degree=5, gmres_tol=1e-12)
    sol = solve_ddm_iterative(assemble_ddm(s))
    g = sol.system.geometry
    u0, _ = sol.traces(0)
    assert np.abs(u0).max() < 1e-6
    for j in (1, 2):
        u, _ = sol.traces(j)
        inc, _ = plane_wave(s, g.boundaries[j].points)
        assert np.abs(u - inc).max() < 1e-6


def test_direct_and_iterative_agree(small):
    _, sy = small
    a = solve_ddm_direct(sy).data
    b = solve_ddm_iterative(sy).data
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-8


def test_schur_matches_direct_elimination(small):
    _, sy = small
    direct = solve_ddm_direct(sy).data
    sol = solve_outer(sy, schur_eliminate(sy), direct=True)
    ext = sy.slices[EXTERIOR]
    assert np.linalg.norm(sol.data[ext] - direct[ext]) / np.linalg.norm(direct[ext]) < 1e-8
    assert np.linalg.norm(sol.data - direct) / np.linalg.norm(direct) < 1e-8


def test_back_substitution_satisfies_full_system(small):
    s, sy = small
    sol = solve_outer(sy, schur_eliminate(sy), tol=1e-6)
    assert sol.report.converged
    assert residual(sy, sol.data) < 10 * 1e-6


def test_neumann_truncation_zero_is_worse(small):
    _, sy = small
    direct = solve_ddm_direct(sy)
    ang = equispaced_angles(64)
    ref = direct.far_field(ang)
    errs = {}
    for nt in (0, 40):
        sol = solve_outer(sy, neumann_merge(sy, nt), direct=True)
        errs[nt] = far_field_error(sol.far_field(ang), ref)
    assert errs[0] > errs[40]


def test_negative_truncation_rejected(small):
    _, sy = small
    with pytest.raises(ValueError):
        neumann_merge(sy, -1)


def test_residual_history_monotone(small):
    _, sy = small
    hist = np.asarray(solve_ddm_iterative(sy).report.history)
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])


@pytest.mark.parametrize("eps", [(1.0, 64.0, 256.0), (1.0, 4.0, 16.0)])
def test_interior_pair_spectral_radius_below_one(eps):
    s = Scenario(omega=1.0, epsilons=eps, n=64)
    sy = assemble_ddm(s)
    a, b = interface_pair_maps(sy, 1, 2)
    assert spectral_radius(a, b) < 1
    assert smallest_singular_value(np.eye(a.shape[0]) - a @ b) > 1e-8


def test_five_subdomain_merge_order_independent():
    s = Scenario(omega=1.0, epsilons=(1.0, 4.0, 16.0, 64.0, 256.0),
                 geometry_kind="five_subdomain_quadrants", n=24)
    sy = assemble_ddm(s)
    first = schur_eliminate(sy).matrix
    other = [([(2, 3)], [(3, 2)]), ([(1, 4)], [(4, 1)]), ([(1, 2), (3, 4)], [(2, 1), (4, 3)])]
    second = schur_eliminate(sy, other).matrix
    assert np.abs(first - second).max() < 1e-9 * np.abs(first).max()


@pytest.mark.parametrize("variant", ["classical", "dtnr", "gsqr"])
def test_variants_agree_with_mtf(variant):
    s = Scenario(omega=2.0, epsilons=(1.0, 4.0, 16.0), n=64, gmres_tol=1e-8)
    ang = equispaced_angles(64)
    ref = solve_mtf(assemble_mtf(s)).far_field(ang)
    sol = solve_ddm_iterative(assemble_ddm(s, formulation=variant))
    assert sol.report.converged
    assert far_field_error(sol.far_field(ang), ref) < 1e-2


def test_generalized_variants_need_fewer_iterations():
    s = Scenario(omega=4.0, epsilons=(1.0, 4.0, 16.0), n=64)
    its = {v: solve_ddm_iterative(assemble_ddm(s, formulation=v)).iterations
           for v in ("classical", "dtnr", "gsqr")}
    assert its["dtnr"] <= its["gsqr"] <= its["classical"]


def test_unknown_variant_rejected():
    with pytest.raises(ValueError):
        assemble_ddm(Scenario(omega=1.0, epsilons=(1.0, 4.0, 16.0), n=16), formulation="optimal")


def test_layout_must_cover_boundaries(small):
    s, sy = small
    with pytest.raises(ValueError):
        assemble_ddm(s, layout=[(1, 2), (2, 1), EXTERIOR])
