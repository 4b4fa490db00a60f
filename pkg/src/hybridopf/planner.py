"""Upgrade planning: choose which AC lines of a meshed grid to convert to HVDC.

Each spanning tree of the AC grid defines one hybrid candidate: tree lines stay AC, the
remaining lines become DC branches with the line rating as capacity. Every candidate
is solved with the relaxation-based OPF and the list is ranked by cost.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .constraints import ObjectiveWeights
from .grid import DcBranch, Grid
from .opf import GridValidationError, solve_opf
from .solver import SolverSettings

log = logging.getLogger(__name__)

MAX_TREES = 10**6
MAX_EDGES = 25


class TooManyTreesError(ValueError):
    pass


@dataclass(frozen=True)
class DcTemplate:
    """How converted lines are modelled: loss factor and one-way exceptions.

    ``directional`` holds (from_bus, to_bus) index pairs; a converted line matching a
    pair becomes a single DC branch in that direction, every other converted line a
    pair of antiparallel branches. Capacity equals the AC rating in MW, minimum flow 0.
    """

    eta: float = 0.035
    directional: frozenset = frozenset()


@dataclass
class CandidateResult:
    cost: float
    kappa: float
    status: str


@dataclass
class UpgradeCandidate:
    tree_edges: tuple  # line indices kept as AC
    converted_edges: tuple  # line indices converted to DC
    dc_params: DcTemplate
    result: Optional[CandidateResult] = None
    error: str = ""

    @property
    def cost(self) -> float:
        return self.result.cost if self.result is not None else np.inf


def _edges(grid: Grid) -> list:
    return [(br.from_bus, br.to_bus) for br in grid.ac_branches]


def laplacian(n_nodes: int, edges: Iterable[tuple]) -> np.ndarray:
    L = np.zeros((n_nodes, n_nodes))
    for a, b in edges:
        if a == b:
            continue
        L[a, a] += 1
        L[b, b] += 1
        L[a, b] -= 1
        L[b, a] -= 1
    return L


def count_spanning_trees(grid: Grid) -> int:
    """Kirchhoff's count: determinant of the Laplacian with one row and column removed."""
    N = grid.n_bus
    if N <= 1:
        return 1
    L = laplacian(N, _edges(grid))
    count = int(round(np.linalg.det(L[1:, 1:])))
    if count == 0:
        log.warning("AC grid is disconnected: no spanning tree")
    return count


def enumerate_spanning_trees(grid: Grid, cap: int = MAX_TREES) -> list:
    """All spanning trees as sorted tuples of line indices, in lexicographic order."""
    edges = _edges(grid)
    N, E = grid.n_bus, len(edges)
    if E > MAX_EDGES:
        raise TooManyTreesError(f"{E} lines exceed the enumeration guard of {MAX_EDGES}")
    total = count_spanning_trees(grid)
    if total > cap:
        raise TooManyTreesError(f"{total} spanning trees exceed the cap of {cap}")
    if total == 0:
        return []

    out = []

    def connected(allowed):
        adj = {n: [] for n in range(N)}
        for e in allowed:
            a, b = edges[e]
            adj[a].append(b)
            adj[b].append(a)
        seen, stack = {0}, [0]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == N

    def find(parent, a):
        while parent[a] != a:
            a = parent[a]
        return a

    def grow(i, chosen, parent):
        if len(chosen) == N - 1:
            out.append(tuple(chosen))
            return
        if i == E or E - i < N - 1 - len(chosen):
            return
        a, b = edges[i]
        ra, rb = find(parent, a), find(parent, b)
        if ra != rb:
            child = parent.copy()
            child[ra] = rb
            grow(i + 1, chosen + [i], child)
        # skipping edge i is only useful if the rest can still span
        if connected(chosen + list(range(i + 1, E))):
            grow(i + 1, chosen, parent)

    grow(0, [], list(range(N)))
    return out


def hybrid_grid(grid: Grid, tree: Sequence[int], template: DcTemplate) -> Grid:
    tree = set(tree)
    ac = [br for k, br in enumerate(grid.ac_branches) if k in tree]
    dc = []
    for k, br in enumerate(grid.ac_branches):
        if k in tree:
            continue
        pairs = [(br.from_bus, br.to_bus)]
        if (br.from_bus, br.to_bus) in template.directional:
            pass
        elif (br.to_bus, br.from_bus) in template.directional:
            pairs = [(br.to_bus, br.from_bus)]
        else:
            pairs.append((br.to_bus, br.from_bus))
        for f, t in pairs:
            dc.append(DcBranch(id=len(dc) + 1, from_bus=f, to_bus=t, eta=template.eta, p_min=0.0, p_max=br.rating))
    return replace(grid, ac_branches=tuple(ac), dc_branches=tuple(grid.dc_branches) + tuple(dc))


def plan_upgrade(grid: Grid, template: Optional[DcTemplate] = None, weights: Optional[ObjectiveWeights] = None,
                 settings: Optional[SolverSettings] = None, workers: Optional[int] = None,
                 cap: int = MAX_TREES) -> list:
    """Solve the OPF for every spanning-tree candidate and rank by cost.

    Failed candidates keep their status and sort last; cost ties fall back to the
    lexicographically smallest converted set.
    """
    template = template or DcTemplate()
    trees = enumerate_spanning_trees(grid, cap)
    all_lines = set(range(grid.n_ac))
    candidates = [UpgradeCandidate(tuple(t), tuple(sorted(all_lines - set(t))), template) for t in trees]

    def run(cand: UpgradeCandidate) -> UpgradeCandidate:
        try:
            res = solve_opf(hybrid_grid(grid, cand.tree_edges, template), weights, settings)
        except (GridValidationError, ValueError, np.linalg.LinAlgError) as exc:
            cand.error = str(exc)
            cand.result = None
            return cand
        cand.result = CandidateResult(res.solution.objective, res.state.kappa, res.solution.status)
        return cand

    with ThreadPoolExecutor(max_workers=workers) as pool:
        solved = list(pool.map(run, candidates))

    def key(c: UpgradeCandidate):
        ok = c.result is not None and c.result.status == "optimal"
        return (0 if ok else 1, c.cost if ok else np.inf, c.converted_edges)

    return sorted(solved, key=key)
