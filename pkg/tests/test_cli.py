import csv

import numpy as np
import pytest

from junctionbie.bio import read_far_field_csv
from junctionbie.cli import (EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_SINGULAR, main, make_reference,
                             parse_gridspec)
from junctionbie.scenario import Scenario


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMALL = """omega = 1.0
epsilons = [1.0, 4.0, 16.0]
n = 16
"""


def manifest(path):
    out = {}
    for line in (path / "manifest.txt").read_text().splitlines():
        key, _, val = line.partition("=")
        out.setdefault(key, []).append(val)
    return out


def test_missing_scenario_is_config_error(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "none.toml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_invalid_scenario_is_config_error(tmp_path):
    cfg = write(tmp_path, "bad.toml", "omega = -1.0\nepsilons = [1.0, 4.0]\n")
    assert main(["run", "--scenario", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_nonconvergence_exit_code(tmp_path):
    cfg = write(tmp_path, "nc.toml", SMALL.replace("omega = 1.0", "omega = 4.0") + "gmres_maxit = 2\n")
    assert main(["run", "--scenario", cfg, "--formulation", "ddm", "--out", str(tmp_path)]) == EXIT_NONCONVERGED


def test_singular_exit_code(tmp_path):
    # Dirichlet eigenvalue of the unit disk with an unregularized DtN map
    cfg = write(tmp_path, "sing.toml", 'omega = 2.404825557695773\nepsilons = [1.0, 1.0]\n'
                'geometry = "single_disk"\nsigma_dtnr = 0.0\nn = 64\n')
    assert main(["run", "--scenario", cfg, "--formulation", "ddm-dtnr", "--out", str(tmp_path)]) == EXIT_SINGULAR


@pytest.mark.parametrize("formulation", ["mtf", "mtf-calderon", "mtf-schur", "gmtf", "ddm",
                                         "ddm-schur", "ddm-neumann", "ddm-dtnr", "ddm-gsqr"])
def test_every_2d_formulation_writes_outputs(tmp_path, formulation):
    cfg = write(tmp_path, "s.toml", SMALL)
    out = tmp_path / "out"
    assert main(["run", "--scenario", cfg, "--formulation", formulation, "--out", str(out)]) == 0
    man = manifest(out)
    for name in man["output"]:
        assert (out / name).exists()
    assert man["formulation"] == [formulation]
    for key in ("n", "omega", "eta", "sigma_dtnr", "sigma_gsqr", "n_trunc"):
        assert key in man


def test_outputs_deterministic(tmp_path):
    cfg = write(tmp_path, "s.toml", SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "--scenario", cfg, "--formulation", "ddm-gsqr", "--out", str(d)]) == 0
    assert (a / "farfield.csv").read_bytes() == (b / "farfield.csv").read_bytes()
    assert (a / "iterations.csv").read_bytes() == (b / "iterations.csv").read_bytes()


def test_reference_and_eps_inf(tmp_path):
    s = Scenario(omega=1.0, epsilons=(1.0, 4.0, 16.0), n=16, farfield_n=64)
    ref = tmp_path / "ref.csv"
    make_reference(s, 32, ref)
    ang, vals = read_far_field_csv(ref)
    assert len(ang) == 64
    cfg = write(tmp_path, "s.toml", SMALL + "farfield_n = 64\n")
    out = tmp_path / "out"
    assert main(["run", "--scenario", cfg, "--formulation", "ddm", "--reference", str(ref),
                 "--out", str(out)]) == 0
    eps_inf = float(manifest(out)["eps_inf"][0])
    assert 0 < eps_inf < 0.1
    with pytest.raises(ValueError):
        make_reference(s, 24, tmp_path / "too_coarse.csv")


def test_reference_against_itself_is_zero(tmp_path):
    s = Scenario(omega=1.0, epsilons=(1.0, 4.0), geometry_kind="single_disk", n=16, farfield_n=32)
    ref = tmp_path / "ref.csv"
    make_reference(s, 32, ref)
    cfg = write(tmp_path, "d.toml", 'omega = 1.0\nepsilons = [1.0, 4.0]\ngeometry = "single_disk"\n'
                'n = 32\nfarfield_n = 32\ngmres_tol = 1e-12\n')
    out = tmp_path / "out"
    assert main(["run", "--scenario", cfg, "--formulation", "mtf", "--reference", str(ref),
                 "--out", str(out)]) == 0
    assert float(manifest(out)["eps_inf"][0]) < 1e-10


def test_oned_eigenvalue_dump(tmp_path):
    assert main(["run", "--formulation", "oned", "--preset", "paper-fig-eig", "--dump-eigenvalues",
                 "--out", str(tmp_path)]) == 0
    with open(tmp_path / "eigenvalues.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["re", "im", "variant"]
    # 300 intervals give 2 * 299 interface unknowns
    assert len(rows) - 1 == 598


def test_nearfield_dump(tmp_path):
    cfg = write(tmp_path, "s.toml", SMALL)
    assert main(["run", "--scenario", cfg, "--formulation", "mtf",
                 "--dump-nearfield=-2:2:5,-2:2:5", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "nearfield.csv") as fh:
        assert len(list(csv.reader(fh))) == 26


def test_gridspec_parsing():
    pts = parse_gridspec("-1:1:3,0:2:2")
    assert pts.shape == (6, 2)
    with pytest.raises(Exception):
        parse_gridspec("1:2")


def test_table_run_small(tmp_path):
    assert main(["run", "--table", "5", "--n", "16", "--table-omegas", "2", "--out", str(tmp_path)]) == 0
    man = manifest(tmp_path)
    report = tmp_path / man["output"][0]
    text = report.read_text()
    assert "omega" in text and len(text.splitlines()) >= 2
