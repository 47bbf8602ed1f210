import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from junctionbie.scenario import Scenario, ScenarioError, load_scenario, plane_wave, plane_wave_trace
from junctionbie.geometry import build_geometry


def test_wavenumbers_from_permittivities():
    s = Scenario(omega=1.0, epsilons=(1.0, 64.0, 256.0))
    assert np.allclose(s.wavenumbers, (1, 8, 16))


def test_coupling_defaults_to_exterior_wavenumber():
    s = Scenario(omega=2.0, epsilons=(1.0, 4.0, 16.0))
    assert s.coupling == pytest.approx(2.0)
    assert s.replace(eta=3.0).coupling == 3.0


def test_sqrt_damping_rule():
    s = Scenario(omega=4.0, epsilons=(1.0, 4.0, 16.0))
    assert s.sigma_gsqr[2] == pytest.approx(16.0 ** (1 / 3))


@pytest.mark.parametrize("bad", [
    "omega = -1\nepsilons = [1.0, 4.0, 16.0]",
    "omega = 1\nepsilons = [1.0, -4.0, 16.0]",
    "omega = 1\nepsilons = [1.0, 4.0]",
    "omega = 1\nepsilons = [1.0, 4.0, 16.0]\nn = 33",
    "omega = 1\nepsilons = [1.0, 4.0, 16.0]\ncolour = 2",
    "epsilons = [1.0, 4.0, 16.0]",
    "omega = 1\nepsilons = [1.0, 4.0, 16.0]\ngeometry = \"triangle\"",
    "omega = = 1",
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ScenarioError):
        load_scenario(bad)


@given(omega=st.floats(0.1, 50.0), e1=st.floats(1.0, 1e4), e2=st.floats(1.0, 1e4),
       n=st.integers(2, 200).map(lambda v: 2 * v))
@settings(max_examples=40, deadline=None)
def test_config_round_trip(omega, e1, e2, n):
    s = Scenario(omega=omega, epsilons=(1.0, e1, e2), n=n)
    back = load_scenario(s.to_config())
    assert back == s
    assert back.digest() == s.digest()


def test_plane_wave_values():
    s = Scenario(omega=3.0, epsilons=(1.0, 4.0, 16.0))
    u, grad = plane_wave(s, np.array([[0.0, 0.0]]))
    assert u[0] == 1
    assert np.allclose(grad[0], [3j, 0])


def test_plane_wave_trace_unit_modulus():
    s = Scenario(omega=2.0, epsilons=(1.0, 4.0, 16.0), n=32)
    g = build_geometry(s)
    tr = plane_wave_trace(s, g.boundaries[0])
    assert np.allclose(np.abs(tr.dirichlet), 1.0)
