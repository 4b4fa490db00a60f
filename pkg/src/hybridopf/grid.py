"""Hybrid AC/DC grid model: buses, AC branches forming a tree, directed DC branches.

Electrical data lives in per-unit on ``Grid.base_mva`` except the quantities that the
case tables quote in MW/MVAr/MVA (loads, generator limits, ratings, DC flow bounds).
Those are converted on demand through the ``*_pu`` helpers so that every matrix built
downstream is in p.u.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np


class DegenerateBranchError(ValueError):
    """Raised for an AC branch whose series impedance is zero."""


@dataclass(frozen=True)
class Generator:
    p_min: float  # MW
    p_max: float  # MW
    q_min: float  # MVAr
    q_max: float  # MVAr
    cost: float  # $/MWh


@dataclass(frozen=True)
class Bus:
    id: int
    v_min_pu: float = 0.9
    v_max_pu: float = 1.1
    shunt_admittance: complex = 0j
    load_p: float = 0.0  # MW
    load_q: float = 0.0  # MVAr
    gen: Optional[Generator] = None

    @property
    def cost(self) -> float:
        # load-only buses carry no price
        return self.gen.cost if self.gen is not None else 0.0

    @property
    def p_gen_max(self) -> float:
        return self.gen.p_max if self.gen is not None else 0.0

    @property
    def q_gen_max(self) -> float:
        return self.gen.q_max if self.gen is not None else 0.0


@dataclass(frozen=True)
class AcBranch:
    """Pi-model branch between ``from_bus`` and ``to_bus`` (0-based bus indices).

    ``ratio_from``/``ratio_to`` are the complex voltage ratios of the ideal transformers
    at either end; ``drop_min``/``drop_max`` bound the relative magnitude drop and
    ``angle_min``/``angle_max`` (radians) the angle difference across the branch.
    """

    id: int
    from_bus: int
    to_bus: int
    series_impedance: complex
    shunt_from: complex = 0j
    shunt_to: complex = 0j
    ratio_from: complex = 1 + 0j
    ratio_to: complex = 1 + 0j
    rating: float = np.inf  # MVA
    drop_min: float = -0.05
    drop_max: float = 0.05
    angle_min: float = -np.deg2rad(50.0)
    angle_max: float = np.deg2rad(50.0)

    @property
    def series_admittance(self) -> complex:
        if self.series_impedance == 0:
            raise DegenerateBranchError(f"degenerate branch {self.id}: zero series impedance")
        return 1.0 / complex(self.series_impedance)

    @property
    def total_ratio(self) -> complex:
        return np.conj(self.ratio_from) * self.ratio_to


@dataclass(frozen=True)
class DcBranch:
    id: int
    from_bus: int
    to_bus: int
    eta: float = 0.0
    p_min: float = 0.0  # MW
    p_max: float = 0.0  # MW


@dataclass(frozen=True)
class Grid:
    base_mva: float
    buses: tuple
    ac_branches: tuple
    dc_branches: tuple = ()
    ref_bus: int = 0
    ref_angle: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "ac_branches", tuple(self.ac_branches))
        object.__setattr__(self, "dc_branches", tuple(self.dc_branches))

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_ac(self) -> int:
        return len(self.ac_branches)

    @property
    def n_dc(self) -> int:
        return len(self.dc_branches)

    def bus_label(self, n: int) -> int:
        return self.buses[n].id

    def tree_edges(self) -> set:
        """Undirected AC adjacency as a set of sorted index pairs."""
        return {tuple(sorted((br.from_bus, br.to_bus))) for br in self.ac_branches}

    def dc_incidence(self) -> np.ndarray:
        """Rows are the vectors h_n: +1 where a DC branch leaves bus n, -(1-eta) where one arrives."""
        h = np.zeros((self.n_bus, self.n_dc))
        for l, dc in enumerate(self.dc_branches):
            h[dc.from_bus, l] += 1.0
            h[dc.to_bus, l] -= 1.0 - dc.eta
        return h


class BranchCoefficients(NamedTuple):
    alpha_from: complex
    beta_from: complex
    alpha_to: complex
    beta_to: complex


def branch_coefficients(branch: AcBranch) -> BranchCoefficients:
    """Admittance coefficients linking terminal currents to the two end voltages.

    ``I_from = alpha_from * V_from + beta_from * V_to`` and
    ``I_to = alpha_to * V_to + beta_to * V_from``.
    """
    y = branch.series_admittance
    rho = branch.total_ratio
    alpha_from = abs(branch.ratio_from) ** 2 * (y + branch.shunt_from)
    alpha_to = abs(branch.ratio_to) ** 2 * (y + branch.shunt_to)
    return BranchCoefficients(
        complex(alpha_from), complex(-rho * y), complex(alpha_to), complex(-np.conj(rho) * y)
    )


class AdmittanceMatrices(NamedTuple):
    Y_from: np.ndarray  # E x N
    Y_to: np.ndarray  # E x N
    Y: np.ndarray  # N x N


def build_admittance_matrices(grid: Grid) -> AdmittanceMatrices:
    N, E = grid.n_bus, grid.n_ac
    Y_from = np.zeros((E, N), dtype=complex)
    Y_to = np.zeros((E, N), dtype=complex)
    Y = np.diag(np.array([bus.shunt_admittance for bus in grid.buses], dtype=complex))
    for k, br in enumerate(grid.ac_branches):
        a_f, b_f, a_t, b_t = branch_coefficients(br)
        f, t = br.from_bus, br.to_bus
        Y_from[k, f] += a_f
        Y_from[k, t] += b_f
        Y_to[k, t] += a_t
        Y_to[k, f] += b_t
        Y[f, f] += a_f
        Y[t, t] += a_t
        Y[f, t] += b_f
        Y[t, f] += b_t
    return AdmittanceMatrices(Y_from, Y_to, Y)


# --- topology and electrical condition checks -------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    elements: tuple = ()

    def __str__(self):
        return f"[{self.kind}] {self.message}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def add(self, kind, message, *elements):
        self.violations.append(Violation(kind, message, tuple(elements)))

    def __str__(self):
        if self.ok:
            return "grid admissible: no violations"
        return "\n".join(str(v) for v in self.violations)


def _ac_components(n_bus: int, edges: Sequence[tuple]) -> tuple[int, bool]:
    """Number of connected components and whether a cycle was met (union-find)."""
    parent = list(range(n_bus))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    cyclic = False
    components = n_bus
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            cyclic = True
        else:
            parent[ra] = rb
            components -= 1
    return components, cyclic


def validate_topology(grid: Grid, tol: float = 1e-12) -> ValidationReport:
    """Check the architecture requirements and the electrical conditions.

    An empty report means the grid belongs to the class for which the semidefinite
    relaxation is exact. Violations are collected, never raised.
    """
    report = ValidationReport()
    N = grid.n_bus
    if N == 0:
        report.add("empty-grid", "grid has no buses")
        return report

    def bad_index(n):
        return not (0 <= n < N)

    for n, bus in enumerate(grid.buses):
        if not (0 <= bus.v_min_pu < bus.v_max_pu):
            report.add("bus-voltage-bounds", f"bus {bus.id}: need 0 <= v_min < v_max", n)
        if bus.gen is not None:
            g = bus.gen
            if not (g.p_min <= g.p_max and g.q_min <= g.q_max):
                report.add("gen-range", f"bus {bus.id}: generator range is not an interval", n)
            if g.cost < 0:
                report.add("gen-cost", f"bus {bus.id}: negative generation cost", n)

    index_ok = True
    for k, br in enumerate(grid.ac_branches):
        if bad_index(br.from_bus) or bad_index(br.to_bus):
            report.add("dangling-bus", f"AC branch {br.id}: unknown bus index", k)
            index_ok = False
            continue
        if br.from_bus == br.to_bus:
            report.add("self-loop", f"AC branch {br.id} starts and ends at bus {grid.bus_label(br.from_bus)}", k)
    for l, dc in enumerate(grid.dc_branches):
        if bad_index(dc.from_bus) or bad_index(dc.to_bus):
            report.add("dangling-bus", f"DC branch {dc.id}: unknown bus index", l)
            continue
        if dc.from_bus == dc.to_bus:
            report.add("self-loop", f"DC branch {dc.id} starts and ends at bus {grid.bus_label(dc.from_bus)}", l)
        if not (0 <= dc.eta < 1):
            report.add("dc-loss-factor", f"DC branch {dc.id}: loss factor must lie in [0, 1)", l)
        if not (0 <= dc.p_min <= dc.p_max):
            report.add("dc-flow-bounds", f"DC branch {dc.id}: need 0 <= p_min <= p_max", l)

    if index_ok:
        seen = {}
        for k, br in enumerate(grid.ac_branches):
            if br.from_bus == br.to_bus:
                continue
            key = (br.from_bus, br.to_bus)
            if key in seen:
                report.add("parallel-ac-branches",
                           f"AC branches {grid.ac_branches[seen[key]].id} and {br.id} are parallel", seen[key], k)
            elif key[::-1] in seen:
                report.add("parallel-ac-branches",
                           f"AC branches {grid.ac_branches[seen[key[::-1]]].id} and {br.id} are antiparallel",
                           seen[key[::-1]], k)
            else:
                seen[key] = k
        edges = list(grid.tree_edges() - {(n, n) for n in range(N)})
        components, cyclic = _ac_components(N, edges)
        if cyclic:
            report.add("ac-cyclic", "AC subgraph cyclic: the AC branches must form a tree")
        if components > 1:
            report.add("ac-disconnected", f"AC subgraph disconnected ({components} components)")
        if grid.n_ac != N - 1:
            report.add("ac-branch-count", f"expected {N - 1} AC branches, found {grid.n_ac}")

    for k, br in enumerate(grid.ac_branches):
        _check_branch_conditions(report, k, br, tol)
    return report


def _check_branch_conditions(report: ValidationReport, k: int, br: AcBranch, tol: float) -> None:
    if br.series_impedance == 0:
        report.add("degenerate-branch", f"AC branch {br.id}: zero series impedance", k)
        return
    y = br.series_admittance
    if not y.real > 0:
        report.add("passive", f"AC branch {br.id}: series conductance must be strictly positive", k)
    if br.shunt_from.real < 0 or br.shunt_to.real < 0:
        report.add("passive", f"AC branch {br.id}: shunt conductance must be nonnegative", k)
    if y.imag > 0:
        report.add("inductive", f"AC branch {br.id}: series susceptance must be inductive", k)
    if abs(br.shunt_from) > abs(y) * (1 + tol) or abs(br.shunt_to) > abs(y) * (1 + tol):
        report.add("insulation", f"AC branch {br.id}: |shunt| / |series admittance| exceeds 1", k)
    if br.ratio_from == 0 or br.ratio_to == 0:
        report.add("voltage-ratio", f"AC branch {br.id}: voltage ratios must be nonzero", k)
        return
    shift = float(np.angle(br.total_ratio))
    if abs(shift) > np.pi / 2 + tol:
        report.add("phase-shift", f"AC branch {br.id}: total phase shift exceeds 90 degrees", k)
    if not (-np.pi / 2 < br.angle_min <= -shift + tol and -shift - tol <= br.angle_max < np.pi / 2):
        report.add("angle-bounds",
                   f"AC branch {br.id}: need -90deg < angle_min <= -arg(rho) <= angle_max < 90deg", k)
    if not (-1 <= br.drop_min < br.drop_max):
        report.add("drop-bounds", f"AC branch {br.id}: need -1 <= drop_min < drop_max", k)
    if not br.rating > 0:
        report.add("rating", f"AC branch {br.id}: rating must be strictly positive", k)
