"""Optimal power flow for hybrid AC/DC grids whose AC part is a spanning tree."""

from .cases import Case, CaseError, bundled_cases, load_case, parse_case, save_case
from .constraints import CanonicalQcqp, ObjectiveWeights, build_qcqp
from .exactness import verify_exactness
from .grid import AcBranch, Bus, DcBranch, Generator, Grid, build_admittance_matrices, validate_topology
from .opf import GridValidationError, OpfResult, recover_state, solve_opf
from .oracle import check_feasibility, local_search_opf, slater_point
from .planner import DcTemplate, count_spanning_trees, enumerate_spanning_trees, plan_upgrade
from .solver import SolverSettings, embed, solve, solve_qcqp_relaxation

__version__ = "0.1.0"
