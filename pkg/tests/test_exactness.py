from dataclasses import replace

import numpy as np
import pytest

from hybridopf.constraints import build_qcqp, cost_terms
from hybridopf.exactness import (check_branch_halfspaces, check_kkt_certificate, check_objective_interior,
                                 check_psi_graph, cone_generators, matrix_graph, psi_graph_report, psi_matrix,
                                 verify_exactness)
from hybridopf.grid import AcBranch, Bus, Generator, Grid
from hybridopf.solver import SdpSolution

from conftest import line_grid


def wrapped_distance(a, b):
    return abs((a - b + np.pi) % (2 * np.pi) - np.pi)


def test_pjm_branch1_arguments(case1):
    gens = cone_generators(case1.grid, 0)
    assert gens.size == 9
    args = np.angle(gens[np.abs(gens) > 0]) % (2 * np.pi)
    assert np.all(args >= np.pi / 2 - 1e-12) and np.all(args <= 3 * np.pi / 2 + 1e-12)
    rep = check_branch_halfspaces(case1.grid)[0]
    assert rep.phi == pytest.approx(np.pi) and rep.passed


def test_all_pjm_branches_pass(case1):
    reports = check_branch_halfspaces(case1.grid)
    assert len(reports) == 4 and all(r.passed for r in reports)


def test_capacitive_series_branch_fails():
    br = AcBranch(1, 0, 1, 0.01 - 0.1j, rating=100)
    assert not check_branch_halfspaces(line_grid([br], 2))[0].passed


def test_boundary_angle_bound_passes():
    shift = 0.4
    br = AcBranch(1, 0, 1, 0.01 + 0.1j, ratio_to=np.exp(1j * shift), angle_min=-0.9, angle_max=-shift, rating=100)
    rep = check_branch_halfspaces(line_grid([br], 2))[0]
    assert rep.passed
    assert wrapped_distance(rep.element_args[8], rep.phi + np.pi / 2) < 1e-12


def test_scaling_ratios_keeps_halfspaces():
    rng = np.random.default_rng(4)
    br = AcBranch(1, 0, 1, 0.02 + 0.2j, 0.01j, 0.02j, 1.05 * np.exp(-0.2j), 0.97 * np.exp(0.3j),
                  angle_min=-0.8, angle_max=0.5, rating=100)
    for c in rng.uniform(0.5, 2.0, 5):
        scaled = replace(br, ratio_from=c * br.ratio_from, ratio_to=c * br.ratio_to)
        assert check_branch_halfspaces(line_grid([scaled], 2))[0].passed


def test_conjugate_mirror(case1):
    """Entries at (to, from) are the conjugates and lie in the mirrored half-plane."""
    grid = case1.grid
    for k, br in enumerate(grid.ac_branches):
        gens = np.conj(cone_generators(grid, k))
        phi = np.pi + np.angle(np.conj(br.total_ratio))
        nz = np.abs(gens) > 0
        assert np.all(wrapped_distance(np.angle(gens[nz]), phi) <= np.pi / 2 + 1e-12)


def test_objective_interior_pjm(case1):
    q = build_qcqp(case1.grid, case1.weights)
    reports = check_objective_interior(case1.grid, q.objective.C)
    assert len(reports) == 4 and all(r.interior for r in reports)
    assert q.objective.C[1, 4] == 0  # buses 2 and 5 are not adjacent


def test_zero_loss_weight_loses_interiority():
    buses = [Bus(1, gen=Generator(0, 300, -200, 200, 20.0)), Bus(2, load_p=50, load_q=10),
             Bus(3, load_p=40, load_q=5)]
    grid = Grid(100.0, buses, [AcBranch(1, 0, 1, 0.01 + 0.1j, rating=200), AcBranch(2, 1, 2, 0.02 + 0.1j, rating=200)])
    C_C, _, _ = cost_terms(grid)
    reports = check_objective_interior(grid, grid.base_mva * C_C)  # w = 1, gamma_loss = 0
    assert reports[0].interior
    assert not reports[1].interior and reports[1].margin == 0.0
    q = build_qcqp(grid)
    assert all(r.interior for r in check_objective_interior(grid, q.objective.C))


def test_psi_graph_samples(case1):
    q = build_qcqp(case1.grid, case1.weights)
    rep = psi_graph_report(q, case1.grid, samples=100, seed=7)
    assert rep.samples == 101
    assert rep.subset_ok and rep.superset_ok
    assert check_psi_graph(q, case1.grid, samples=100, seed=7)
    assert matrix_graph(psi_matrix(q, np.zeros(q.n_constraints))) == case1.grid.tree_edges()


def test_extra_ac_branch_creates_cycle(case1, ac_case):
    q = build_qcqp(ac_case.grid, ac_case.weights)
    graph = matrix_graph(q.objective.C)
    assert len(graph) == 6 > ac_case.grid.n_bus - 1  # six edges on five buses: not a tree
    assert not check_psi_graph(q, case1.grid, samples=5)


def test_kkt_certificate_case1(case1, solved1):
    rep = check_kkt_certificate(solved1.qcqp, solved1.solution, case1.grid)
    assert rep.psi_rank == 4
    assert rep.psi_min_eig >= -1e-8
    assert rep.trace_psi_v <= 1e-7
    assert rep.comp_slack_max <= 1e-6
    assert rep.dual_eq_residual >= 0
    assert rep.graph_match and rep.rank_bound_ok
    assert rep.psi_rank + rep.v_rank <= case1.grid.n_bus


def test_kkt_negative_control(case1, solved1):
    v = solved1.state.v
    fake = SdpSolution(V=np.outer(v, v.conj()), p=solved1.state.p, lam=np.zeros(solved1.qcqp.n_constraints),
                       status="optimal", gap=0.0, objective=solved1.state.objective)
    rep = check_kkt_certificate(solved1.qcqp, fake, case1.grid)
    assert rep.trace_psi_v > 1e-3


def test_verify_exactness_summary(case1, solved1):
    summary = verify_exactness(case1.grid, solved1.qcqp, solved1.solution, samples=20, seed=1)
    assert summary.ok
