from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridopf.grid import AcBranch
from hybridopf.opf import GridValidationError, ZeroStateError, evaluate_state, recover_state, solve_opf
from hybridopf.oracle import check_feasibility

from conftest import line_grid, two_bus_grid

# Published operating point of the first case study, bus order 1..5.
TABLE_V_BUS = [  # P_gen MW, Q_gen MVAr, |V| p.u., angle deg
    (210.00, 155.00, 1.096, 5.929),
    (0.00, 0.00, 1.088, 0.555),
    (201.99, 227.89, 1.100, 0.000),
    (0.00, 0.00, 1.046, 1.466),
    (600.00, 22.94, 1.100, 7.441),
]
TABLE_V_DC = [0.00, 3.61, 100.66]
TABLE_V_AC = [  # |S_from| MVA, pf_from, |S_to| MVA, pf_to, drop %, delta deg
    (398.56, 1.000, 395.73, -0.998, -0.70, -5.374),
    (348.45, 0.888, 332.90, -0.921, -4.55, -4.463),
    (498.20, -1.000, 499.86, 0.999, 0.36, 1.511),
    (159.11, 0.596, 159.03, -0.594, 1.07, -0.555),
]


def test_case1_operating_point(solved1):
    rep = solved1.report()
    assert solved1.state.kappa <= 1e-6 and solved1.state.exact
    for n, (pg, qg, vm, va) in enumerate(TABLE_V_BUS):
        assert rep.p_gen[n] == pytest.approx(pg, abs=0.5)
        assert rep.q_gen[n] == pytest.approx(qg, abs=2.0)
        assert rep.v_mag[n] == pytest.approx(vm, abs=0.003)
        assert rep.v_angle_deg[n] == pytest.approx(va, abs=0.1)
    np.testing.assert_allclose(rep.dc_flow, TABLE_V_DC, atol=1.0)
    for k, (sf, pff, st_, pft, nu, d) in enumerate(TABLE_V_AC):
        assert rep.s_from[k] == pytest.approx(sf, abs=0.5)
        assert rep.pf_from[k] == pytest.approx(pff, abs=2e-3)
        assert rep.s_to[k] == pytest.approx(st_, abs=0.5)
        assert rep.pf_to[k] == pytest.approx(pft, abs=2e-3)
        assert rep.drop_pct[k] == pytest.approx(nu, abs=0.01)
        assert rep.angle_diff_deg[k] == pytest.approx(d, abs=0.01)
    assert rep.cost == pytest.approx(15000, abs=10)


def test_case2_cost(solved2):
    assert solved2.solution.objective == pytest.approx(24044, abs=15)
    assert solved2.state.kappa <= 1e-6


def test_recover_rank_one_input():
    rng = np.random.default_rng(1)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    st_ = recover_state(np.outer(v, v.conj()), np.zeros(0), ref_bus=2, ref_angle=0.3)
    assert st_.kappa < 1e-14 and st_.exact
    assert np.angle(st_.v[2]) == pytest.approx(0.3)
    phase = st_.v[0] / v[0]
    assert abs(phase) == pytest.approx(1.0)
    np.testing.assert_allclose(st_.v, v * phase, atol=1e-12)


def test_recover_isotropic_is_not_exact():
    st_ = recover_state(np.eye(5), np.zeros(0))
    assert st_.kappa == pytest.approx(1.0)
    assert not st_.exact


def test_recover_zero_state():
    with pytest.raises(ZeroStateError, match="zero state"):
        recover_state(np.zeros((3, 3)), np.zeros(0))


def test_flat_state_has_no_drop_or_angle(case1):
    grid = case1.grid
    rep = evaluate_state(grid, np.ones(5, dtype=complex), np.zeros(3))
    np.testing.assert_allclose(rep.angle_diff_deg, 0, atol=1e-12)
    np.testing.assert_allclose(rep.drop_pct, 0, atol=1e-12)


def test_dimension_mismatch(case1):
    with pytest.raises(ValueError):
        evaluate_state(case1.grid, np.ones(4), np.zeros(3))


def test_recovered_state_feasible_and_consistent(solved1):
    q, sol, st_ = solved1.qcqp, solved1.solution, solved1.state
    assert check_feasibility(q, st_.v, st_.p, tol=1e-6).feasible
    V1 = np.outer(st_.v, st_.v.conj())
    for con in q.constraints:
        assert abs(np.trace(con.C @ V1).real - np.trace(con.C @ sol.V).real) <= 1e-6 * (1 + abs(con.b))
    assert abs(st_.objective - sol.objective) <= 1e-5 * abs(sol.objective)


def test_objective_identity_and_energy_balance(solved1):
    grid, w = solved1.grid, solved1.weights
    rep = solved1.report()
    v, p = solved1.state.v, solved1.state.p
    from_report = w.w * rep.cost + w.gamma_loss * rep.losses
    assert from_report == pytest.approx(solved1.qcqp.objective_value(v, p), rel=1e-8)
    load = sum(b.load_p for b in grid.buses)
    assert np.sum(rep.p_gen) == pytest.approx(load + rep.ac_losses + rep.dc_losses, abs=1e-6 * grid.base_mva)


@settings(max_examples=25, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_global_phase_invariance(solved1, phi):
    grid = solved1.grid
    v, p = solved1.state.v, solved1.state.p
    a = evaluate_state(grid, v, p)
    b = evaluate_state(grid, v * np.exp(1j * phi), p)
    for field in ("p_gen", "q_gen", "v_mag", "dc_flow", "s_from", "pf_from", "s_to", "pf_to", "drop_pct",
                  "angle_diff_deg"):
        np.testing.assert_allclose(getattr(a, field), getattr(b, field), atol=1e-9)
    assert a.cost == pytest.approx(b.cost, rel=1e-12)


def test_power_factor_range(solved2):
    rep = solved2.report()
    assert np.all(np.abs(rep.pf_from) <= 1) and np.all(np.abs(rep.pf_to) <= 1)
    assert np.all(rep.s_from >= 0) and np.all(rep.s_to >= 0)


def test_no_demand_dispatches_nothing():
    res = solve_opf(two_bus_grid(load_p=0.0, load_q=0.0))
    assert res.solution.optimal
    assert abs(res.solution.objective) < 1e-3
    assert np.all(np.abs(res.report().p_gen) < 1e-3)


def test_missing_lower_injection_bounds_allow_absorption(case1):
    """Without lower injection bounds a dear generator may act as a sink."""
    grid = case1.grid
    idle = replace(grid, buses=tuple(replace(b, load_p=0.0, load_q=0.0) for b in grid.buses))
    res = solve_opf(idle, case1.weights)
    assert res.solution.optimal and res.state.exact
    assert res.report().p_gen[2] < -100


def test_inadmissible_grid_is_refused():
    branches = [AcBranch(1, 0, 1, 0.01 + 0.1j, rating=100), AcBranch(2, 1, 2, 0.01 + 0.1j, rating=100),
                AcBranch(3, 2, 0, 0.01 + 0.1j, rating=100)]
    with pytest.raises(GridValidationError) as info:
        solve_opf(line_grid(branches, 3))
    assert "ac-cyclic" in info.value.report.kinds()
