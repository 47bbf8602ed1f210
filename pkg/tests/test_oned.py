import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import end_amplitude_map, interval_amplitude_map
from junctionbie.numerics import gmres
from junctionbie.oned import (OneDProblem, ResonanceError, assemble_1d, dtn_1d, dtn_1d_exponential,
                              eigenvalues_1d, end_map, end_rtr_1d, interval_map, nilpotency_index,
                              fig_eig_preset, precond_solve, rtr_1d, sweep_inverse, sweep_matrix,
                              transfer_matrix_oracle)

positive = st.floats(0.1, 20.0)
lengths = st.floats(0.01, 3.0)


def _nonresonant(k, eta, h):
    e = np.exp(1j * k * h)
    return abs((k + eta) ** 2 * e - (k - eta) ** 2 / e) > 1e-6


@settings(max_examples=60, deadline=None)
@given(positive, positive, lengths)
def test_closed_form_matches_amplitude_oracle(k, eta, h):
    ref = interval_amplitude_map(k, h, 1j * eta, 1j * eta, 1j * eta, 1j * eta)
    assert np.abs(rtr_1d(k, eta, h).matrix() - ref).max() < 1e-12 * max(1.0, np.abs(ref).max())


@settings(max_examples=60, deadline=None)
@given(positive, positive, lengths)
def test_end_closed_form_matches_oracle(k, eta, h):
    s, g = end_rtr_1d(k, eta, h)
    s_ref, g_ref = end_amplitude_map(k, h, 1j * eta, 1j * eta)
    assert abs(s - s_ref) < 1e-12 and abs(g - g_ref) < 1e-12 * max(1.0, abs(g_ref))


@settings(max_examples=60, deadline=None)
@given(positive, positive, lengths, st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_classical_map_is_unitary(k, eta, h, v):
    m = rtr_1d(k, eta, h).matrix()
    x = np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]])
    assert abs(np.linalg.norm(m @ x) - np.linalg.norm(x)) < 1e-12 * max(1.0, np.linalg.norm(x))


def test_transparent_coupling():
    k, h = 2.5, 0.7
    m = rtr_1d(k, k, h)
    assert abs(m.s11) < 1e-15 and abs(m.s22) < 1e-15
    assert abs(m.s12 - np.exp(-1j * k * h)) < 1e-14
    assert abs(m.s21 - np.exp(-1j * k * h)) < 1e-14


def test_end_value_spot_check():
    s, _ = end_rtr_1d(1.0, 2.0, np.pi / 2)
    assert abs(s - 1.0) < 1e-14


def test_rtr_rejects_nonpositive():
    with pytest.raises(ValueError):
        rtr_1d(0.0, 1.0, 1.0)


def test_dtn_examples():
    assert abs(dtn_1d(1.0, np.pi / 2)) < 1e-15
    assert abs(dtn_1d(2.0, np.pi / 8) - 2.0) < 1e-14
    with pytest.raises(ResonanceError):
        dtn_1d(1.0, np.pi)


def test_dtn_exponential_form():
    rng = np.random.default_rng(2)
    for k, h in zip(rng.uniform(0.1, 10, 50), rng.uniform(0.01, 1.0, 50)):
        if abs(np.sin(k * h)) > 1e-3:
            assert abs(dtn_1d(k, h) - dtn_1d_exponential(k, h)) < 1e-14 * max(1, abs(dtn_1d(k, h)))


def test_dtn_maps_match_oracle():
    k, h = 3.0, 0.4
    p = dtn_1d(2.0, 0.3)
    q = dtn_1d(k, h)
    got = interval_map(k, h, p, p, q, q)
    assert np.abs(got - interval_amplitude_map(k, h, p, p, q, q)).max() < 1e-12
    s, _ = end_map(k, h, p, q)
    assert abs(s) < 1e-12
    assert abs(s - end_amplitude_map(k, h, p, q)[0]) < 1e-12


def small_problem(n=6, eta=1.0):
    rng = np.random.default_rng(n)
    a = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 0.3, n))])
    return OneDProblem(a, rng.uniform(0.5, 4.0, n), eta=eta)


def test_classical_sparsity_structure():
    pb = small_problem(8)
    a = assemble_1d(pb).coupling()
    size = a.shape[0]
    counts = [np.count_nonzero(a[r:r + 2]) for r in range(0, size, 2)]
    # end interfaces lose one reflection entry to the Dirichlet end interval
    assert counts[0] == 3 and counts[-1] == 3
    assert all(c == 4 for c in counts[1:-1])
    assert a[1, 0] != 0 and a[size - 2, size - 1] != 0


def test_dtn_ends_decouple():
    a = assemble_1d(small_problem(8), "dtn").coupling()
    assert abs(a[1, 0]) < 1e-12 and abs(a[-2, -1]) < 1e-12


@pytest.fixture(scope="module")
def fig_eig():
    pb = fig_eig_preset()
    return pb, assemble_1d(pb), assemble_1d(pb, "dtn")


def test_fig_eig_configuration(fig_eig):
    pb, sy, _ = fig_eig
    assert pb.n_intervals == 300 and sy.size == 598


def test_smallest_eigenvalue_order(fig_eig):
    _, sy, _ = fig_eig
    lam = np.abs(eigenvalues_1d(sy)).min()
    assert 1e-4 < lam < 1e-2


def test_eigenvalues_on_circle(fig_eig):
    _, sy, _ = fig_eig
    ev = eigenvalues_1d(sy)
    assert np.abs(ev - 1).max() <= 1 + 1e-8
    assert np.mean(np.abs(ev - 1) > 0.5) >= 0.9


def test_sweep_structure(fig_eig):
    _, _, dtn = fig_eig
    m = sweep_matrix(dtn)
    a = m - np.eye(dtn.size)
    ev = np.linalg.eigvals(m)
    assert np.abs(ev - 1).max() < 1e-6
    assert np.linalg.matrix_rank(a) == dtn.size - 2
    assert nilpotency_index(a) is not None
    p = np.linalg.matrix_power(a, dtn.size)
    assert np.abs(p).max() < 1e-10


def test_sweep_inverse_exact(fig_eig):
    _, _, dtn = fig_eig
    inv = sweep_inverse(dtn)
    assert np.abs(sweep_matrix(dtn) @ inv - np.eye(dtn.size)).max() < 1e-12


def test_single_interval_oracle():
    pb = OneDProblem(np.array([0.0, 1.0]), np.array([1.0]), left=1.0, right=0.0)
    u, du, _ = transfer_matrix_oracle(pb)
    x = pb.breakpoints
    assert np.abs(u - np.sin(1 - x) / np.sin(1)).max() < 1e-13
    assert np.abs(du + np.cos(1 - x) / np.sin(1)).max() < 1e-13


def test_oracle_resonance():
    with pytest.raises(ResonanceError):
        transfer_matrix_oracle(OneDProblem(np.array([0.0, np.pi]), np.array([1.0])))


@pytest.mark.parametrize("variant", ["classical", "dtn"])
def test_ddm_solve_matches_oracle(fig_eig, variant):
    pb, sy, dtn = fig_eig
    system = sy if variant == "classical" else dtn
    rep = gmres(system.matrix, system.rhs, tol=1e-12, maxit=5000)
    _, _, f = transfer_matrix_oracle(pb, variant)
    assert rep.converged
    assert np.abs(rep.solution - f).max() < 1e-9 * np.abs(f).max()


def test_preconditioner_cuts_iterations():
    res = precond_solve(fig_eig_preset())
    assert res.preconditioned.iterations < res.plain.iterations


def test_preconditioned_spectrum_clusters(fig_eig):
    _, sy, dtn = fig_eig
    ev = np.linalg.eigvals(sweep_inverse(dtn) @ sy.matrix)
    assert np.mean(np.abs(ev - 1) < 0.5) >= 0.8


def test_transparent_limit_preconditioner_is_identity():
    # constant medium with eta = k: only the Dirichlet end reflections remain
    pb = OneDProblem(np.linspace(0, 1, 21), np.full(20, 3.0), eta=3.0)
    sy = assemble_1d(pb)
    dev = sweep_inverse(sy) @ sy.matrix - np.eye(sy.size)
    assert np.abs(dev[:, 1:-1]).max() < 1e-10


def test_problem_validation():
    with pytest.raises(ValueError):
        OneDProblem(np.array([0.0, 1.0, 0.5]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        OneDProblem(np.array([0.0, 1.0]), np.array([-1.0]))
    with pytest.raises(ValueError):
        assemble_1d(OneDProblem(np.array([0.0, 1.0]), np.array([1.0])))
    with pytest.raises(ValueError):
        assemble_1d(small_problem(), "double_sweep")
