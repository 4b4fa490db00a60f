from dataclasses import replace

import numpy as np
import pytest

from hybridopf.constraints import CanonicalQcqp, Constraint, Objective, build_qcqp
from hybridopf.opf import solve_opf
from hybridopf.oracle import (NotStrictlyFeasibleError, check_feasibility, local_search_opf, relaxed_residuals,
                              slater_point)
from hybridopf.solver import solve_qcqp_relaxation


def tightened(grid):
    """Same grid with every limit pulled inwards, so its optimum is strictly feasible in the original."""
    buses = tuple(replace(b, v_min_pu=b.v_min_pu + 0.01, v_max_pu=b.v_max_pu - 0.01, load_p=b.load_p + 1,
                          load_q=b.load_q + 1,
                          gen=None if b.gen is None else replace(b.gen, p_max=b.gen.p_max - 1, q_max=b.gen.q_max - 1))
                  for b in grid.buses)
    ac = tuple(replace(br, rating=br.rating - 20, drop_min=br.drop_min + 0.002, drop_max=br.drop_max - 0.002,
                       angle_min=br.angle_min + 0.01, angle_max=br.angle_max - 0.01) for br in grid.ac_branches)
    dc = tuple(replace(d, p_min=d.p_min + 1, p_max=d.p_max - 1) for d in grid.dc_branches)
    return replace(grid, buses=buses, ac_branches=ac, dc_branches=dc)


@pytest.fixture(scope="module")
def interior_state(case1):
    res = solve_opf(tightened(case1.grid), case1.weights)
    assert res.state.exact
    return res.state.v, res.state.p


def test_recovered_state_is_feasible(solved1):
    rep = check_feasibility(solved1.qcqp, solved1.state.v, solved1.state.p)
    assert rep.feasible and rep.max_violation <= 1e-6
    assert rep.residuals.size == solved1.qcqp.n_constraints


def test_dead_grid_violates_voltage_bounds(solved1):
    q = solved1.qcqp
    rep = check_feasibility(q, np.zeros(5), np.zeros(3))
    assert not rep.feasible
    assert set(q.indices("voltage-lb")) <= set(rep.violated())


def test_single_dc_overload(case1, solved1):
    # DC line 1 (bus 3 to 4) capped at 50 MW so that 51 MW stays within both buses' limits
    grid = case1.grid
    grid = replace(grid, dc_branches=(replace(grid.dc_branches[0], p_max=50.0),) + grid.dc_branches[1:])
    q = build_qcqp(grid, case1.weights)
    p = solved1.state.p.copy()
    p[0] = 0.51
    rep = check_feasibility(q, solved1.state.v, p)
    bad = rep.violated(1e-9)
    assert len(bad) == 1 and q.constraints[bad[0]].tag == "dc-ub"
    assert rep.residuals[bad[0]] == pytest.approx(0.01, abs=1e-12)


def test_dimension_check(solved1):
    with pytest.raises(ValueError):
        check_feasibility(solved1.qcqp, np.ones(4), np.zeros(3))


def test_slater_point_on_pjm(case1, interior_state):
    q = build_qcqp(case1.grid, case1.weights)
    v, p = interior_state
    V, p_out, eps = slater_point(q, v, p)
    assert eps >= 1e-6
    assert np.all(relaxed_residuals(q, V, p_out) <= 0)
    assert np.linalg.eigvalsh(V).min() >= eps * (1 - 1e-9)


def test_small_margin_forces_small_epsilon():
    e1 = np.diag([1.0, 0.0]).astype(complex)
    cons = (Constraint(e1, np.zeros(0), 1.0, "voltage-ub", 0),)
    q = CanonicalQcqp(2, 0, Objective(np.eye(2, dtype=complex), np.zeros(0), 0.0), cons)
    eps_wide = slater_point(q, np.array([np.sqrt(0.5), 0]), np.zeros(0))[2]
    eps_tight = slater_point(q, np.array([np.sqrt(1 - 1e-4), 0]), np.zeros(0))[2]
    assert eps_tight == pytest.approx(1e-4, rel=1e-6)
    assert eps_tight < eps_wide
    with pytest.raises(NotStrictlyFeasibleError, match="not strictly feasible"):
        slater_point(q, np.array([1.0, 0]), np.zeros(0))


def test_zero_epsilon_rejected(case1, interior_state):
    q = build_qcqp(case1.grid, case1.weights)
    with pytest.raises(NotStrictlyFeasibleError):
        slater_point(q, *interior_state, epsilon=0.0)


def test_local_search_never_beats_relaxation(solved1):
    ls = local_search_opf(solved1.qcqp, n_starts=20, seed=0)
    assert ls.found
    assert ls.objective >= 15000 - 1
    assert ls.objective >= solved1.solution.objective * (1 - 1e-4)
    assert len(ls.start_objectives) == 20


def test_local_search_case2(solved2):
    ls = local_search_opf(solved2.qcqp, n_starts=20, seed=0)
    assert ls.found and ls.objective >= 24044 - 2


def test_local_search_convex_case():
    rng = np.random.default_rng(2)
    N, D = 3, 2

    def psd():
        B = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        return B @ B.conj().T / N

    cons = [Constraint(psd(), rng.normal(size=D), 1.0, "current-from", m) for m in range(3)]
    for l in range(D):
        cons += [Constraint(np.zeros((N, N), complex), np.eye(D)[l], 1.0, "dc-ub", l),
                 Constraint(np.zeros((N, N), complex), -np.eye(D)[l], 1.0, "dc-lb", l)]
    q = CanonicalQcqp(N, D, Objective(psd(), rng.normal(size=D), 0.0), tuple(cons))
    sdp = solve_qcqp_relaxation(q)
    ls = local_search_opf(q, n_starts=10, seed=1)
    assert sdp.optimal and ls.found
    assert ls.objective == pytest.approx(sdp.objective, rel=1e-4)
