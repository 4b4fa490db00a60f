"""Numerical certificates for exactness of the relaxation on a concrete grid.

The checks mirror the structure of the rank-1 argument:

* every off-diagonal entry contributed by a branch's constraint matrices lies in a
  closed half-plane with normal rho_k (``check_branch_halfspaces``),
* the objective entry on each tree edge lies strictly inside that half-plane
  (``check_objective_interior``),
* hence Psi(Lambda) = C_0 + sum Lambda_m C_m has exactly the AC tree as its graph for
  every Lambda >= 0 (``check_psi_graph``, sampled),
* and at a computed KKT point Psi is PSD with rank N-1, forcing rank(V) <= 1
  (``check_kkt_certificate``).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import CanonicalQcqp
from .grid import Grid, branch_coefficients
from .solver import SdpSolution

#: Relative threshold separating structural zeros from nonzeros in a matrix graph.
GRAPH_ZERO_TOL = 1e-12


def _wrap(angle):
    return (np.asarray(angle) + np.pi) % (2 * np.pi) - np.pi


@dataclass
class BranchConeReport:
    branch: int
    phi: float
    element_args: list
    max_deviation: float
    passed: bool


def cone_generators(grid: Grid, k: int) -> np.ndarray:
    """The nine complex numbers whose conic hull holds every constraint entry at (from, to)."""
    br = grid.ac_branches[k]
    a_f, b_f, a_t, b_t = branch_coefficients(br)
    return np.array([
        b_f / 2,
        np.conj(b_t) / 2,
        -b_f / 2j,
        np.conj(b_t) / 2j,
        np.conj(a_f) * b_f,
        a_t * np.conj(b_t),
        -1.0,
        np.tan(br.angle_min) + 1j,
        -np.tan(br.angle_max) - 1j,
    ], dtype=complex)


def check_branch_halfspaces(grid: Grid, tol: float = 1e-12) -> list:
    """Per-branch test that all cone generators have argument within pi/2 of pi + arg(rho_k).

    Boundary arguments pass: the cone only has to lie in the closed half-plane.
    """
    out = []
    for k, br in enumerate(grid.ac_branches):
        phi = np.pi + float(np.angle(br.total_ratio))
        gens = cone_generators(grid, k)
        nonzero = np.abs(gens) > 0
        args = np.angle(gens)
        dev = np.maximum(np.abs(_wrap(args[nonzero] - phi)) - np.pi / 2, 0.0)
        max_dev = float(np.max(dev, initial=0.0))
        out.append(BranchConeReport(k, phi, [float(a) if nz else float("nan") for a, nz in zip(args, nonzero)],
                                    max_dev, max_dev <= tol))
    return out


@dataclass
class EdgeInteriorReport:
    branch: int
    i: int
    j: int
    margin: float  # Re(conj(rho_k) [C0]_{from,to}); strictly negative inside
    interior: bool


def check_objective_interior(grid: Grid, C0: np.ndarray) -> list:
    out = []
    for k, br in enumerate(grid.ac_branches):
        f, t = br.from_bus, br.to_bus
        margin = float(np.real(np.conj(br.total_ratio) * C0[f, t]))
        out.append(EdgeInteriorReport(k, f, t, margin, margin < 0))
    return out


def psi_matrix(qcqp: CanonicalQcqp, lam: np.ndarray) -> np.ndarray:
    C = qcqp.objective.C.astype(complex).copy()
    for l, con in zip(lam, qcqp.constraints):
        if l:
            C += l * con.C
    return C


def psi_vector(qcqp: CanonicalQcqp, lam: np.ndarray) -> np.ndarray:
    out = qcqp.objective.c.astype(float).copy()
    for l, con in zip(lam, qcqp.constraints):
        out += l * con.c
    return out


def matrix_graph(A: np.ndarray, rel_tol: float = GRAPH_ZERO_TOL) -> set:
    """Undirected edge set {(i, j), i < j} of nonzero off-diagonal entries."""
    N = A.shape[0]
    off = np.abs(A - np.diag(np.diag(A)))
    scale = off.max(initial=0.0)
    if scale == 0:
        return set()
    mask = off > rel_tol * scale
    return {(i, j) for i in range(N) for j in range(i + 1, N) if mask[i, j] or mask[j, i]}


@dataclass
class PsiGraphReport:
    samples: int
    missing: list  # tree edges that vanished, per failing sample
    extra: list  # off-tree entries that appeared, per failing sample

    @property
    def subset_ok(self) -> bool:
        return not self.extra

    @property
    def superset_ok(self) -> bool:
        return not self.missing

    def __bool__(self):
        return self.subset_ok and self.superset_ok


def sample_multipliers(qcqp: CanonicalQcqp, rng: np.random.Generator) -> np.ndarray:
    scale = np.array([1.0 / (np.linalg.norm(con.C) + 1.0) for con in qcqp.constraints])
    return rng.uniform(0.0, 1.0, qcqp.n_constraints) * scale


def psi_graph_report(qcqp: CanonicalQcqp, grid: Grid, samples: int = 100, seed: int = 0,
                     rel_tol: float = GRAPH_ZERO_TOL, workers: Optional[int] = None) -> PsiGraphReport:
    tree = grid.tree_edges()
    rng = np.random.default_rng(seed)
    draws = [np.zeros(qcqp.n_constraints)] + [sample_multipliers(qcqp, rng) for _ in range(samples)]

    def one(lam):
        g = matrix_graph(psi_matrix(qcqp, lam), rel_tol)
        return sorted(tree - g), sorted(g - tree)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, draws))
    missing = [(s, m) for s, (m, _) in enumerate(results) if m]
    extra = [(s, e) for s, (_, e) in enumerate(results) if e]
    return PsiGraphReport(len(draws), missing, extra)


def check_psi_graph(qcqp: CanonicalQcqp, grid: Grid, samples: int = 100, seed: int = 0,
                    rel_tol: float = GRAPH_ZERO_TOL) -> bool:
    """True when graph(Psi(Lambda)) equals the AC tree for Lambda = 0 and every sampled Lambda."""
    return bool(psi_graph_report(qcqp, grid, samples, seed, rel_tol))


@dataclass
class KktReport:
    """KKT residuals at a solver point, normalized by the objective scale ||C_0||_F + ||c_0||."""

    psi_min_eig: float
    psi_rank: int
    dual_eq_residual: float
    comp_slack_max: float
    trace_psi_v: float
    graph_match: bool
    rank_bound_ok: bool
    v_rank: int
    psi_eigenvalues: np.ndarray


def numerical_rank(A: np.ndarray, rank_tol: float = 1e-7) -> int:
    ev = np.linalg.eigvalsh((A + A.conj().T) / 2)
    top = np.max(np.abs(ev), initial=0.0)
    return int(np.sum(ev > rank_tol * top)) if top > 0 else 0


def check_kkt_certificate(qcqp: CanonicalQcqp, solution: SdpSolution, grid: Grid, rank_tol: float = 1e-7,
                          graph_tol: float = 1e-6) -> KktReport:
    """Assemble Psi(Lambda*) from the returned multipliers and test the KKT system.

    ``graph_tol`` is looser than the structural threshold because Psi is assembled
    from inexact multipliers; a tree edge entry is still orders of magnitude above it.
    """
    lam = np.asarray(solution.lam, dtype=float)
    scale = np.linalg.norm(qcqp.objective.C) + np.linalg.norm(qcqp.objective.c)
    scale = scale if scale > 0 else 1.0
    psi = psi_matrix(qcqp, lam) / scale
    V, p = solution.V, solution.p
    ev = np.linalg.eigvalsh(psi)
    residuals = np.array([np.real(np.trace(con.C @ V)) + con.c @ p - con.b for con in qcqp.constraints])
    comp = np.abs(lam * residuals) / scale
    N = qcqp.n_bus
    psi_rank = numerical_rank(psi, rank_tol)
    v_rank = numerical_rank(V, rank_tol)
    return KktReport(
        psi_min_eig=float(ev[0]),
        psi_rank=psi_rank,
        dual_eq_residual=float(np.linalg.norm(psi_vector(qcqp, lam)) / scale),
        comp_slack_max=float(comp.max(initial=0.0)),
        trace_psi_v=float(abs(np.real(np.trace(psi @ V)))),
        graph_match=matrix_graph(psi, graph_tol) == grid.tree_edges(),
        rank_bound_ok=psi_rank >= N - 1 and psi_rank + v_rank <= N,
        v_rank=v_rank,
        psi_eigenvalues=ev,
    )


@dataclass
class ExactnessSummary:
    halfspaces: list
    interior: list
    psi_graph: PsiGraphReport
    kkt: Optional[KktReport]

    @property
    def halfspaces_ok(self) -> bool:
        return all(r.passed for r in self.halfspaces)

    @property
    def interior_ok(self) -> bool:
        return all(r.interior for r in self.interior)

    def kkt_ok(self, psd_tol: float = 1e-8, trace_tol: float = 1e-7, cs_tol: float = 1e-6) -> bool:
        k = self.kkt
        return (k is not None and k.psi_min_eig >= -psd_tol and k.trace_psi_v <= trace_tol
                and k.comp_slack_max <= cs_tol and k.graph_match and k.rank_bound_ok)

    @property
    def ok(self) -> bool:
        return self.halfspaces_ok and self.interior_ok and bool(self.psi_graph) and self.kkt_ok()


def verify_exactness(grid: Grid, qcqp: CanonicalQcqp, solution: Optional[SdpSolution] = None,
                     samples: int = 100, seed: int = 0) -> ExactnessSummary:
    kkt = check_kkt_certificate(qcqp, solution, grid) if solution is not None and solution.optimal else None
    return ExactnessSummary(
        check_branch_halfspaces(grid),
        check_objective_interior(grid, qcqp.objective.C),
        psi_graph_report(qcqp, grid, samples, seed),
        kkt,
    )
