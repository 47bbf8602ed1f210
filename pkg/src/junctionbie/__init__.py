"""Boundary integral solvers for transmission problems with multiple junctions."""
from .scenario import Scenario, ScenarioError, load_scenario, load_scenario_file
from .geometry import build_geometry
from .mtf import assemble_mtf, solve_mtf
from .gmtf import assemble_gmtf, solve_gmtf
from .ddm import assemble_ddm, solve_ddm_iterative, solve_ddm_direct, schur_eliminate, solve_outer

__version__ = "0.1.0"
