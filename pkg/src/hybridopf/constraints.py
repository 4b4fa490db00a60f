"""Quadratic objective and constraint matrices of the hybrid-grid OPF.

Every constraint has the form ``v^H C v + c^T p <= b`` with ``v`` the complex bus
voltages (p.u.) and ``p`` the DC branch flows (p.u.). Lower bounds on power injection
are intentionally absent: adding them would break the half-space structure that makes
the semidefinite relaxation exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import AcBranch, Bus, Grid, build_admittance_matrices

#: Constraint families in emission order inside each element block.
BUS_TAGS = ("voltage-ub", "voltage-lb", "p-inj", "q-inj")
BRANCH_TAGS = ("current-from", "current-to", "drop-lb", "drop-ub", "angle-cos", "angle-lb", "angle-ub")
DC_TAGS = ("dc-ub", "dc-lb")


def hermitian(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    return (A + A.conj().T) / 2


def unit_outer(N: int, i: int, j: int) -> np.ndarray:
    M = np.zeros((N, N), dtype=complex)
    M[i, j] = 1.0
    return M


@dataclass(frozen=True)
class ObjectiveWeights:
    """``w`` weights generation cost, ``gamma_loss`` ($/MWh) weights electrical loss."""

    w: float = 1.0
    gamma_loss: float = 1e-6


@dataclass(frozen=True)
class Constraint:
    C: np.ndarray
    c: np.ndarray
    b: float
    tag: str
    element: int  # bus, AC branch or DC branch index depending on the tag

    def value(self, v: np.ndarray, p: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.C @ v)) + self.c @ p)


@dataclass(frozen=True)
class Objective:
    C: np.ndarray
    c: np.ndarray
    const: float


@dataclass(frozen=True)
class CanonicalQcqp:
    n_bus: int
    n_dc: int
    objective: Objective
    constraints: tuple

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def tags(self) -> list:
        return [con.tag for con in self.constraints]

    def indices(self, tag: str) -> list:
        return [m for m, con in enumerate(self.constraints) if con.tag == tag]

    def objective_value(self, v: np.ndarray, p: np.ndarray) -> float:
        obj = self.objective
        return float(np.real(np.vdot(v, obj.C @ v)) + obj.c @ p + obj.const)


def bus_power_matrices(Y: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian P_n, Q_n with ``v^H P_n v`` / ``v^H Q_n v`` the AC injection at bus n."""
    N = Y.shape[0]
    S = np.zeros((N, N), dtype=complex)
    S[:, n] = Y[n, :].conj()
    P = (S + S.conj().T) / 2
    Q = (S - S.conj().T) / 2j
    return P, Q


def branch_current_matrices(Y_from: np.ndarray, Y_to: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    r_from, r_to = Y_from[k], Y_to[k]
    return np.outer(r_from.conj(), r_from), np.outer(r_to.conj(), r_to)


def branch_loss_matrix(Y_from: np.ndarray, Y_to: np.ndarray, branch: AcBranch, k: int) -> np.ndarray:
    """P_L,k: ``v^H P_L,k v`` is the active power absorbed by branch k."""
    N = Y_from.shape[1]
    S = np.outer(Y_from[k].conj(), np.eye(N)[branch.from_bus]) + np.outer(Y_to[k].conj(), np.eye(N)[branch.to_bus])
    return (S + S.conj().T) / 2


def angle_matrices(N: int, branch: AcBranch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    f, t = branch.from_bus, branch.to_bus
    Mft = unit_outer(N, f, t)
    A = -Mft - Mft.T
    tl, tu = np.tan(branch.angle_min), np.tan(branch.angle_max)
    A_lb = (tl + 1j) * Mft + (tl - 1j) * Mft.T
    A_ub = -(tu + 1j) * Mft - (tu - 1j) * Mft.T
    return A, A_lb, A_ub


def drop_matrices(N: int, branch: AcBranch) -> tuple[np.ndarray, np.ndarray]:
    f, t = branch.from_bus, branch.to_bus
    M_lb = (1 + branch.drop_min) ** 2 * unit_outer(N, f, f) - unit_outer(N, t, t)
    M_ub = unit_outer(N, t, t) - (1 + branch.drop_max) ** 2 * unit_outer(N, f, f)
    return M_lb, M_ub


def substitute_current_bounds(branch: AcBranch, from_bus: Bus, to_bus: Bus,
                              base_mva: float = 100.0) -> tuple[float, float]:
    """Conservative current limits (p.u.) implied by the MVA rating at maximum voltage."""
    if not branch.rating > 0:
        raise ValueError(f"AC branch {branch.id}: rating must be strictly positive")
    if not (from_bus.v_max_pu > 0 and to_bus.v_max_pu > 0):
        raise ValueError(f"AC branch {branch.id}: voltage upper bounds must be positive")
    s = branch.rating / base_mva
    return s / from_bus.v_max_pu, s / to_bus.v_max_pu


def build_constraints(grid: Grid) -> list:
    """All ``4N + 7E + 2D`` constraints, bus block first, then AC branches, then DC branches."""
    N, D = grid.n_bus, grid.n_dc
    Y_from, Y_to, Y = build_admittance_matrices(grid)
    h = grid.dc_incidence()
    base = grid.base_mva
    zero_c = np.zeros(D)
    out = []

    for n, bus in enumerate(grid.buses):
        M = unit_outer(N, n, n)
        P, Q = bus_power_matrices(Y, n)
        p_ub = (bus.p_gen_max - bus.load_p) / base
        q_ub = (bus.q_gen_max - bus.load_q) / base
        out += [
            Constraint(M, zero_c, bus.v_max_pu ** 2, "voltage-ub", n),
            Constraint(-M, zero_c, -bus.v_min_pu ** 2, "voltage-lb", n),
            Constraint(hermitian(P), h[n].copy(), p_ub, "p-inj", n),
            Constraint(hermitian(Q), zero_c, q_ub, "q-inj", n),
        ]

    for k, br in enumerate(grid.ac_branches):
        i_from, i_to = substitute_current_bounds(br, grid.buses[br.from_bus], grid.buses[br.to_bus], base)
        I_from, I_to = branch_current_matrices(Y_from, Y_to, k)
        M_lb, M_ub = drop_matrices(N, br)
        A, A_lb, A_ub = angle_matrices(N, br)
        out += [
            Constraint(hermitian(I_from), zero_c, i_from ** 2, "current-from", k),
            Constraint(hermitian(I_to), zero_c, i_to ** 2, "current-to", k),
            Constraint(hermitian(M_lb), zero_c, 0.0, "drop-lb", k),
            Constraint(hermitian(M_ub), zero_c, 0.0, "drop-ub", k),
            Constraint(hermitian(A), zero_c, 0.0, "angle-cos", k),
            Constraint(hermitian(A_lb), zero_c, 0.0, "angle-lb", k),
            Constraint(hermitian(A_ub), zero_c, 0.0, "angle-ub", k),
        ]

    Z = np.zeros((N, N), dtype=complex)
    for l, dc in enumerate(grid.dc_branches):
        e = np.eye(D)[l]
        out += [
            Constraint(Z, e, dc.p_max / base, "dc-ub", l),
            Constraint(Z, -e, -dc.p_min / base, "dc-lb", l),
        ]
    return out


def cost_terms(grid: Grid) -> tuple[np.ndarray, np.ndarray, float]:
    """C_C, c_C (per p.u. of power, prices in $/MWh) and Gamma_L ($/h) of the generation cost."""
    N = grid.n_bus
    Y = build_admittance_matrices(grid).Y
    h = grid.dc_incidence()
    C = np.zeros((N, N), dtype=complex)
    c = np.zeros(grid.n_dc)
    for n, bus in enumerate(grid.buses):
        if bus.cost == 0:
            continue
        P, _ = bus_power_matrices(Y, n)
        C += bus.cost * P
        c += bus.cost * h[n]
    gamma_load = sum(bus.cost * bus.load_p for bus in grid.buses)
    return hermitian(C), c, float(gamma_load)


def loss_terms(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """C_L, c_L: total electrical loss (p.u.) is ``v^H C_L v + c_L^T p``."""
    Y_from, Y_to, _ = build_admittance_matrices(grid)
    N = grid.n_bus
    C = np.zeros((N, N), dtype=complex)
    for k, br in enumerate(grid.ac_branches):
        C += branch_loss_matrix(Y_from, Y_to, br, k)
    for n, bus in enumerate(grid.buses):
        C[n, n] += bus.shunt_admittance.real
    c = np.array([dc.eta for dc in grid.dc_branches], dtype=float)
    return hermitian(C), c


def build_objective(grid: Grid, weights: ObjectiveWeights) -> Objective:
    """Weighted cost + loss objective, scaled so that its value is in $/h."""
    if not weights.gamma_loss > 0:
        raise ValueError("loss weight must be strictly positive")
    if weights.w < 0:
        raise ValueError("cost weight must be nonnegative")
    C_C, c_C, gamma_load = cost_terms(grid)
    C_L, c_L = loss_terms(grid)
    base = grid.base_mva
    C = base * (weights.w * C_C + weights.gamma_loss * C_L)
    c = base * (weights.w * c_C + weights.gamma_loss * c_L)
    return Objective(hermitian(C), c, weights.w * gamma_load)


def build_qcqp(grid: Grid, weights: Optional[ObjectiveWeights] = None) -> CanonicalQcqp:
    weights = weights or ObjectiveWeights()
    return CanonicalQcqp(grid.n_bus, grid.n_dc, build_objective(grid, weights), tuple(build_constraints(grid)))
