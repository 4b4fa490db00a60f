"""End-to-end OPF: build the QCQP, solve its relaxation, recover and evaluate the state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import CanonicalQcqp, ObjectiveWeights, build_qcqp
from .grid import Grid, ValidationReport, build_admittance_matrices, validate_topology
from .solver import SdpSolution, SolverSettings, embed, solve

KAPPA_THRESHOLD = 1e-6


class GridValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("grid violates the hybrid architecture requirements:\n" + str(report))
        self.report = report


class ZeroStateError(ValueError):
    pass


@dataclass
class RecoveredState:
    v: np.ndarray
    p: np.ndarray
    kappa: float
    objective: float
    exact: bool
    eigenvalues: Optional[np.ndarray] = None


@dataclass
class OperatingReport:
    """Physical quantities in table units: MW, MVAr, MVA, p.u., degrees, percent."""

    bus_ids: list
    p_gen: np.ndarray
    q_gen: np.ndarray
    v_mag: np.ndarray
    v_angle_deg: np.ndarray
    dc_flow: np.ndarray
    s_from: np.ndarray
    pf_from: np.ndarray
    s_to: np.ndarray
    pf_to: np.ndarray
    drop_pct: np.ndarray
    angle_diff_deg: np.ndarray
    cost: float
    losses: float
    ac_losses: float
    dc_losses: float

    def to_dict(self) -> dict:
        return {
            "buses": [
                {"id": int(b), "p_gen_mw": float(p), "q_gen_mvar": float(q), "v_mag_pu": float(vm),
                 "v_angle_deg": float(va)}
                for b, p, q, vm, va in zip(self.bus_ids, self.p_gen, self.q_gen, self.v_mag, self.v_angle_deg)
            ],
            "dc_branches": [{"index": l + 1, "p_mw": float(f)} for l, f in enumerate(self.dc_flow)],
            "ac_branches": [
                {"index": k + 1, "s_from_mva": float(sf), "pf_from": float(pff), "s_to_mva": float(st),
                 "pf_to": float(pft), "drop_pct": float(nu), "angle_diff_deg": float(d)}
                for k, (sf, pff, st, pft, nu, d) in enumerate(zip(self.s_from, self.pf_from, self.s_to, self.pf_to,
                                                                  self.drop_pct, self.angle_diff_deg))
            ],
            "totals": {"cost_per_h": self.cost, "losses_mw": self.losses, "ac_losses_mw": self.ac_losses,
                       "dc_losses_mw": self.dc_losses},
        }


@dataclass
class OpfResult:
    grid: Grid
    weights: ObjectiveWeights
    qcqp: CanonicalQcqp
    solution: SdpSolution
    state: RecoveredState

    def report(self) -> OperatingReport:
        return evaluate_state(self.grid, self.state.v, self.state.p)


def recover_state(V: np.ndarray, p: np.ndarray, ref_bus: int = 0, ref_angle: float = 0.0,
                  kappa_threshold: float = KAPPA_THRESHOLD,
                  qcqp: Optional[CanonicalQcqp] = None) -> RecoveredState:
    """Rank-1 factor of V from its dominant eigenpair, rotated onto the reference angle.

    ``kappa`` is the ratio of the two largest eigenvalues; the state is flagged exact
    when it does not exceed ``kappa_threshold``. A near-tie between the two leading
    eigenvalues is reported, not resolved.
    """
    V = (V + V.conj().T) / 2
    sig, U = np.linalg.eigh(V)
    sig, U = sig[::-1], U[:, ::-1]
    if not sig[0] > 0:
        raise ZeroStateError("zero state: V has no positive eigenvalue (grid shut down)")
    kappa = abs(sig[1] / sig[0]) if sig.size > 1 else 0.0
    v = np.sqrt(sig[0]) * U[:, 0]
    v = v * np.exp(1j * (ref_angle - np.angle(v[ref_bus])))
    p = np.asarray(p, dtype=float)
    objective = qcqp.objective_value(v, p) if qcqp is not None else np.nan
    return RecoveredState(v=v, p=p, kappa=float(kappa), objective=objective,
                          exact=bool(kappa <= kappa_threshold), eigenvalues=sig)


def evaluate_state(grid: Grid, v: np.ndarray, p: np.ndarray) -> OperatingReport:
    v = np.asarray(v, dtype=complex)
    p = np.asarray(p, dtype=float)
    if v.shape != (grid.n_bus,) or p.shape != (grid.n_dc,):
        raise ValueError("state dimensions do not match the grid")
    base = grid.base_mva
    Y_from, Y_to, Y = build_admittance_matrices(grid)
    s_inj = v * np.conj(Y @ v) + 0j
    s_inj += grid.dc_incidence() @ p
    load_p = np.array([b.load_p for b in grid.buses])
    load_q = np.array([b.load_q for b in grid.buses])
    p_gen = base * s_inj.real + load_p
    q_gen = base * s_inj.imag + load_q

    f = np.array([br.from_bus for br in grid.ac_branches], dtype=int)
    t = np.array([br.to_bus for br in grid.ac_branches], dtype=int)
    S_from = np.conj(Y_from @ v) * v[f]
    S_to = np.conj(Y_to @ v) * v[t]

    def pf(S):
        mag = np.abs(S)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(mag > 0, S.real / np.where(mag > 0, mag, 1.0), 1.0)

    with np.errstate(invalid="ignore", divide="ignore"):
        drop = np.abs(v[t]) / np.abs(v[f]) - 1
    delta = np.angle(np.conj(v[f]) * v[t])
    shunt_loss = sum(b.shunt_admittance.real * abs(v[n]) ** 2 for n, b in enumerate(grid.buses))
    ac_loss = float(np.sum(S_from.real + S_to.real) + shunt_loss) * base
    dc_loss = float(sum(dc.eta * p[l] for l, dc in enumerate(grid.dc_branches))) * base
    cost = float(sum(b.cost * pg for b, pg in zip(grid.buses, p_gen)))
    return OperatingReport(
        bus_ids=[b.id for b in grid.buses],
        p_gen=p_gen, q_gen=q_gen, v_mag=np.abs(v), v_angle_deg=np.rad2deg(np.angle(v)),
        dc_flow=base * p,
        s_from=base * np.abs(S_from), pf_from=pf(S_from), s_to=base * np.abs(S_to), pf_to=pf(S_to),
        drop_pct=100 * drop, angle_diff_deg=np.rad2deg(delta),
        cost=cost, losses=float(np.sum(p_gen) - np.sum(load_p)), ac_losses=ac_loss, dc_losses=dc_loss,
    )


def solve_opf(grid: Grid, weights: Optional[ObjectiveWeights] = None, settings: Optional[SolverSettings] = None,
              kappa_threshold: float = KAPPA_THRESHOLD) -> OpfResult:
    """Validate, relax, solve and recover. Raises GridValidationError for inadmissible grids."""
    weights = weights or ObjectiveWeights()
    report = validate_topology(grid)
    if not report.ok:
        raise GridValidationError(report)
    qcqp = build_qcqp(grid, weights)
    solution = solve(embed(qcqp), settings)
    state = recover_state(solution.V, solution.p, grid.ref_bus, grid.ref_angle, kappa_threshold, qcqp)
    return OpfResult(grid, weights, qcqp, solution, state)
