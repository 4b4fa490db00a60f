"""Independent checks on relaxation results: constraint residuals, a Slater point and a
multistart local search on the original nonconvex QCQP.

The local search is a corroborator. Its only contractual role is the sandwich
``relaxation optimum <= objective of every feasible point it finds``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .constraints import CanonicalQcqp


class NotStrictlyFeasibleError(ValueError):
    pass


@dataclass
class FeasibilityReport:
    residuals: np.ndarray  # value - bound; positive entries are violations
    max_violation: float
    feasible: bool

    def violated(self, tol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(self.residuals > tol)


def constraint_residuals(qcqp: CanonicalQcqp, v: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.array([con.value(v, p) - con.b for con in qcqp.constraints])


def relaxed_residuals(qcqp: CanonicalQcqp, V: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.array([np.real(np.trace(con.C @ V)) + con.c @ p - con.b for con in qcqp.constraints])


def check_feasibility(qcqp: CanonicalQcqp, v: np.ndarray, p: np.ndarray, tol: float = 1e-6) -> FeasibilityReport:
    v = np.asarray(v, dtype=complex)
    p = np.asarray(p, dtype=float)
    if v.shape != (qcqp.n_bus,) or p.shape != (qcqp.n_dc,):
        raise ValueError("state dimensions do not match the problem")
    r = constraint_residuals(qcqp, v, p)
    worst = float(max(r.max(initial=-np.inf), 0.0))
    return FeasibilityReport(r, worst, worst <= tol)


def slater_point(qcqp: CanonicalQcqp, v: np.ndarray, p: np.ndarray, epsilon: float = 1.0,
                 iters: int = 200) -> tuple[np.ndarray, np.ndarray, float]:
    """``V = v v^H + eps I`` with the largest eps in (0, epsilon] keeping the relaxation feasible.

    ``v, p`` must satisfy every constraint with a nonzero quadratic part strictly and the
    rest at least weakly. Returns ``(V, p, eps)``; V is certified positive definite.
    """
    v = np.asarray(v, dtype=complex)
    p = np.asarray(p, dtype=float)
    N = qcqp.n_bus
    base = np.outer(v, v.conj())
    r0 = constraint_residuals(qcqp, v, p)
    quadratic = np.array([np.any(con.C != 0) for con in qcqp.constraints])
    if np.any(r0[quadratic] >= 0) or np.any(r0[~quadratic] > 0):
        raise NotStrictlyFeasibleError("input not strictly feasible")

    def feasible(eps):
        return np.all(relaxed_residuals(qcqp, base + eps * np.eye(N), p) <= 0)

    lo, hi = 0.0, float(epsilon)
    if hi <= 1e-12:
        raise NotStrictlyFeasibleError("input not strictly feasible: no eps > 1e-12 admissible")
    if feasible(hi):
        lo = hi
    else:
        for _ in range(iters):
            mid = (lo + hi) / 2
            if feasible(mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(hi, 1e-300):
                break
    if lo <= 1e-12:
        raise NotStrictlyFeasibleError("input not strictly feasible: no eps > 1e-12 admissible")
    V = base + lo * np.eye(N)
    np.linalg.cholesky(V)
    return V, p, lo


# --- multistart local search ---------------------------------------------------------------


@dataclass
class LocalSearchResult:
    v: Optional[np.ndarray]
    p: Optional[np.ndarray]
    objective: float
    found: bool
    start_objectives: list = field(default_factory=list)  # nan where the start ended infeasible
    start_violations: list = field(default_factory=list)


def _bounds_from_tags(qcqp: CanonicalQcqp):
    N, D = qcqp.n_bus, qcqp.n_dc
    vmin, vmax = np.full(N, 0.9), np.full(N, 1.1)
    pmin, pmax = np.zeros(D), np.ones(D)
    for con in qcqp.constraints:
        if con.tag == "voltage-ub":
            vmax[con.element] = np.sqrt(max(con.b, 0.0))
        elif con.tag == "voltage-lb":
            vmin[con.element] = np.sqrt(max(-con.b, 0.0))
        elif con.tag == "dc-ub":
            pmax[con.element] = con.b
        elif con.tag == "dc-lb":
            pmin[con.element] = -con.b
    return vmin, vmax, pmin, pmax


def _local_solve(qcqp: CanonicalQcqp, x0: np.ndarray, max_steps: int):
    N = qcqp.n_bus
    Cs = np.array([con.C for con in qcqp.constraints])
    cs = np.array([con.c for con in qcqp.constraints]).reshape(len(Cs), -1)
    bs = np.array([con.b for con in qcqp.constraints])
    obj = qcqp.objective
    scale = np.linalg.norm(obj.C) + np.linalg.norm(obj.c)
    scale = scale if scale > 0 else 1.0
    C0, c0 = obj.C / scale, obj.c / scale

    def split(x):
        return x[:N] + 1j * x[N:2 * N], x[2 * N:]

    def fun(x):
        v, p = split(x)
        Cv = C0 @ v
        val = np.real(np.vdot(v, Cv)) + c0 @ p
        grad = np.concatenate([2 * Cv.real, 2 * Cv.imag, c0])
        return val, grad

    def cons(x):
        v, p = split(x)
        quad = np.real(np.einsum("i,mij,j->m", v.conj(), Cs, v))
        return bs - quad - cs @ p

    def cons_jac(x):
        v, _ = split(x)
        Cv = np.einsum("mij,j->mi", Cs, v)
        return -np.hstack([2 * Cv.real, 2 * Cv.imag, cs])

    res = minimize(fun, x0, jac=True, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                   options={"maxiter": max_steps, "ftol": 1e-12})
    v, p = split(res.x)
    return v, p


def local_search_opf(qcqp: CanonicalQcqp, n_starts: int = 20, seed: int = 0, tol: float = 1e-6,
                     max_steps: int = 2000, workers: Optional[int] = None) -> LocalSearchResult:
    """Best feasible local optimum of the nonconvex QCQP over random starts.

    Starts draw voltage magnitudes uniformly within their bounds, angles uniformly in
    [-30, 30] degrees and DC flows uniformly within their bounds. Each start is refined
    by sequential quadratic programming (SLSQP) with exact gradients.
    """
    N = qcqp.n_bus
    vmin, vmax, pmin, pmax = _bounds_from_tags(qcqp)
    rng = np.random.default_rng(seed)
    starts = []
    for _ in range(n_starts):
        mag = rng.uniform(vmin, vmax)
        ang = rng.uniform(-np.pi / 6, np.pi / 6, N)
        v = mag * np.exp(1j * ang)
        p = rng.uniform(pmin, pmax)
        starts.append(np.concatenate([v.real, v.imag, p]))

    def run(x0):
        v, p = _local_solve(qcqp, x0, max_steps)
        rep = check_feasibility(qcqp, v, p, tol)
        return v, p, rep

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run, starts))

    best = LocalSearchResult(None, None, np.inf, False)
    for v, p, rep in outcomes:
        val = qcqp.objective_value(v, p) if rep.feasible else np.nan
        best.start_objectives.append(val)
        best.start_violations.append(rep.max_violation)
        if rep.feasible and val < best.objective:
            best.v, best.p, best.objective, best.found = v, p, val, True
    return best
