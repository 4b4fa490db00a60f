"""Primal-dual interior-point solver for the semidefinite relaxation.

The relaxed problem

    minimize    trace(C_0 V) + c_0^T p
    subject to  trace(C_m V) + c_m^T p <= b_m,   m = 1..M
                V Hermitian, V >= 0

is parametrized by the N^2 real degrees of freedom of V plus p and written as the cone
program

    minimize c^T x   subject to   G x + s = h,   s in R_+^M x S_+^{2N}

where the semidefinite slack is the real symmetric embedding [[Re V, -Im V], [Im V, Re V]].
The iteration is a Mehrotra predictor-corrector path-following method with
Nesterov-Todd scaling, infeasible start and dense normal equations. Work per iteration
is O(N^6) in the bus count, which is fine for a few dozen buses; chordal decomposition
is not attempted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .constraints import CanonicalQcqp

log = logging.getLogger(__name__)


class NonHermitianError(ValueError):
    pass


# --- Hermitian <-> real parametrization ---------------------------------------------------


def embed_hermitian(A: np.ndarray) -> np.ndarray:
    """Real symmetric 2N x 2N image of a Hermitian N x N matrix."""
    A = np.asarray(A, dtype=complex)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def unembed(X: np.ndarray) -> np.ndarray:
    """Hermitian matrix closest to a real symmetric 2N x 2N matrix (averages the two copies)."""
    N = X.shape[0] // 2
    X11, X12, X21, X22 = X[:N, :N], X[:N, N:], X[N:, :N], X[N:, N:]
    W = (X11 + X22) / 2 + 1j * (X21 - X12) / 2
    return (W + W.conj().T) / 2


def _offdiag_pairs(N: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(N, 1)


def hermitian_to_vec(V: np.ndarray) -> np.ndarray:
    """Diagonal, then Re and Im of the strict upper triangle (row-major)."""
    N = V.shape[0]
    iu, ju = _offdiag_pairs(N)
    out = np.empty(N * N)
    out[:N] = np.diag(V).real
    out[N::2] = V[iu, ju].real
    out[N + 1::2] = V[iu, ju].imag
    return out


def vec_to_hermitian(x: np.ndarray, N: int) -> np.ndarray:
    iu, ju = _offdiag_pairs(N)
    V = np.diag(x[:N].astype(complex))
    V[iu, ju] = x[N::2] + 1j * x[N + 1::2]
    V[ju, iu] = x[N::2] - 1j * x[N + 1::2]
    return V


def trace_coefficients(C: np.ndarray) -> np.ndarray:
    """Vector a with ``trace(C V) = a @ hermitian_to_vec(V)`` for Hermitian C, V."""
    N = C.shape[0]
    iu, ju = _offdiag_pairs(N)
    out = np.empty(N * N)
    out[:N] = np.diag(C).real
    out[N::2] = 2 * C[iu, ju].real
    out[N + 1::2] = 2 * C[iu, ju].imag
    return out


def _basis_embeddings(N: int) -> np.ndarray:
    """embed(E_j) for the basis E_j dual to hermitian_to_vec."""
    out = np.zeros((N * N, 2 * N, 2 * N))
    for i in range(N):
        out[i, i, i] = out[i, N + i, N + i] = 1.0
    iu, ju = _offdiag_pairs(N)
    for t, (i, j) in enumerate(zip(iu, ju)):
        r = N + 2 * t
        # real part: symmetric ones in both diagonal blocks
        out[r, i, j] = out[r, j, i] = out[r, N + i, N + j] = out[r, N + j, N + i] = 1.0
        # imaginary part: Im V = e_i e_j^T - e_j e_i^T
        q = r + 1
        out[q, N + i, j], out[q, N + j, i] = 1.0, -1.0
        out[q, i, N + j], out[q, j, N + i] = -1.0, 1.0
    return out


# --- problem and solution containers ------------------------------------------------------


@dataclass(frozen=True)
class SolverSettings:
    gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    max_iters: int = 200
    step_fraction: float = 0.99


@dataclass
class SdpProblem:
    qcqp: CanonicalQcqp
    c: np.ndarray
    G_lin: np.ndarray
    h_lin: np.ndarray
    G_psd: np.ndarray  # (n_vars, 2N, 2N)
    row_scale: np.ndarray
    obj_scale: float
    x0: np.ndarray

    @property
    def n_bus(self) -> int:
        return self.qcqp.n_bus

    @property
    def n_dc(self) -> int:
        return self.qcqp.n_dc

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class SdpSolution:
    V: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    status: str
    gap: float
    objective: float
    dual_objective: float = np.nan
    psi: Optional[np.ndarray] = None
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    comp_slack: float = np.nan
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _initial_point(qcqp: CanonicalQcqp) -> np.ndarray:
    N = qcqp.n_bus
    cons = qcqp.constraints
    ub = {c.element: np.sqrt(max(c.b, 0.0)) for c in cons if c.tag == "voltage-ub"}
    lb = {c.element: np.sqrt(max(-c.b, 0.0)) for c in cons if c.tag == "voltage-lb"}
    mids = [((ub[n] + lb.get(n, 0.0)) / 2) ** 2 for n in ub]
    tau = float(np.mean(mids)) if mids else 1.0
    p_hi = {c.element: c.b for c in cons if c.tag == "dc-ub"}
    p_lo = {c.element: -c.b for c in cons if c.tag == "dc-lb"}
    p0 = np.array([(p_hi.get(l, 0.0) + p_lo.get(l, 0.0)) / 2 for l in range(qcqp.n_dc)])
    return np.concatenate([hermitian_to_vec(tau * np.eye(N, dtype=complex)), p0])


def embed(qcqp: CanonicalQcqp, herm_tol: float = 1e-12) -> SdpProblem:
    """Real cone-program data for the relaxation of ``qcqp``, with row and objective scaling."""
    N, D = qcqp.n_bus, qcqp.n_dc
    mats = [qcqp.objective.C] + [con.C for con in qcqp.constraints]
    for m, C in enumerate(mats):
        C = np.asarray(C)
        if C.shape != (N, N):
            raise ValueError(f"matrix {m} has shape {C.shape}, expected {(N, N)}")
        resid = np.max(np.abs(C - C.conj().T), initial=0.0)
        if resid > herm_tol * max(1.0, np.max(np.abs(C), initial=0.0)):
            raise NonHermitianError(f"matrix {m} is not Hermitian (residual {resid:.2e})")

    obj = qcqp.objective
    obj_norm = np.linalg.norm(obj.C) + np.linalg.norm(obj.c)
    obj_scale = 1.0 / obj_norm if obj_norm > 0 else 1.0
    c = obj_scale * np.concatenate([trace_coefficients(obj.C), obj.c])

    M = qcqp.n_constraints
    G_lin = np.empty((M, N * N + D))
    h_lin = np.empty(M)
    row_scale = np.empty(M)
    for m, con in enumerate(qcqp.constraints):
        norm = np.linalg.norm(con.C) + np.linalg.norm(con.c) + abs(con.b)
        row_scale[m] = 1.0 / norm if norm > 0 else 1.0
        G_lin[m] = row_scale[m] * np.concatenate([trace_coefficients(con.C), con.c])
        h_lin[m] = row_scale[m] * con.b

    G_psd = np.zeros((N * N + D, 2 * N, 2 * N))
    G_psd[: N * N] = -_basis_embeddings(N)
    return SdpProblem(qcqp, c, G_lin, h_lin, G_psd, row_scale, obj_scale, _initial_point(qcqp))


# --- interior-point iteration -------------------------------------------------------------


def _sym(A):
    return (A + A.T) / 2


def _nt_scaling(S, Z):
    """R with R^-1 S R^-T = R^T Z R = diag(lam)."""
    Ls = np.linalg.cholesky(S)
    Lz = np.linalg.cholesky(Z)
    U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
    R = Ls @ Vt.T / np.sqrt(lam)
    Rinv = (np.sqrt(lam)[:, None] * Vt) @ sla.solve_triangular(Ls, np.eye(Ls.shape[0]), lower=True)
    return R, Rinv, lam


def _max_step_lin(lam, ds):
    neg = ds < 0
    return np.min(-lam[neg] / ds[neg]) if np.any(neg) else np.inf


def _max_step_psd(lam, dS):
    d = 1.0 / np.sqrt(lam)
    e = np.linalg.eigvalsh(_sym(d[:, None] * dS * d[None, :]))[0]
    return -1.0 / e if e < 0 else np.inf


def _psd_ok(A):
    try:
        np.linalg.cholesky(A)
        return True
    except np.linalg.LinAlgError:
        return False


def solve(problem: SdpProblem, settings: Optional[SolverSettings] = None) -> SdpSolution:
    """Run the interior-point method; never raises on non-convergence, see ``status``."""
    st = settings or SolverSettings()
    c, Gl, hl, Gs = problem.c, problem.G_lin, problem.h_lin, problem.G_psd
    n, m, q = c.size, hl.size, Gs.shape[1]
    hs = np.zeros((q, q))
    nu = m + q
    h_norm = max(1.0, np.sqrt(hl @ hl))
    c_norm = max(1.0, np.linalg.norm(c))
    # the gap is relative to the full objective, constant term included
    offset = problem.qcqp.objective.const * problem.obj_scale

    def Gs_op(x):
        return np.tensordot(x, Gs, axes=1)

    def Gs_adj(Z):
        return np.einsum("jab,ab->j", Gs, Z)

    x = problem.x0.copy()
    s = np.maximum(hl - Gl @ x, 1.0)
    S = _sym(hs - Gs_op(x))
    if not _psd_ok(S):
        S = np.eye(q)
    z = np.ones(m)
    Z = np.eye(q)

    status = "max-iters"
    history = []
    best = None
    stall = 0
    it = 0
    for it in range(st.max_iters + 1):
        rpl = Gl @ x + s - hl
        rps = Gs_op(x) + S - hs
        rd = c + Gl.T @ z + Gs_adj(Z)
        gap = s @ z + np.sum(S * Z)
        pobj = c @ x
        dobj = -hl @ z - np.sum(hs * Z)
        pres = np.sqrt(rpl @ rpl + np.sum(rps * rps)) / h_norm
        dres = np.linalg.norm(rd) / c_norm
        relgap = gap / max(min(abs(pobj + offset), abs(dobj + offset)), 1e-12)
        history.append((it, pobj, dobj, gap, pres, dres))
        log.debug("it %3d pobj % .10e dobj % .10e gap %.2e pres %.2e dres %.2e", it, pobj, dobj, gap, pres, dres)

        merit = max(pres, dres, min(gap, relgap))
        if best is None or merit < best[0]:
            best = (merit, x.copy(), s.copy(), S.copy(), z.copy(), Z.copy(), gap, relgap, pres, dres)

        # the absolute test only matters for problems whose optimum is (close to) zero
        if pres <= st.feas_tol and dres <= st.feas_tol and (relgap <= st.gap_tol or gap <= 1e-3 * st.gap_tol):
            status = "optimal"
            break
        # Farkas ray for primal infeasibility: G^T z ~ 0 with h^T z < 0
        hz = -dobj
        if hz < 0 and np.linalg.norm(rd - c) / -hz < st.feas_tol and gap > 1e3:
            status = "infeasible"
            break
        if it == st.max_iters:
            break

        mu = gap / nu
        try:
            R, Rinv, lam_s = _nt_scaling(S, Z)
        except np.linalg.LinAlgError:
            status = "stalled"
            break
        w = np.sqrt(s / z)
        lam_l = np.sqrt(s * z)
        W_inv = Rinv.T @ Rinv

        Glw = Gl / w[:, None]
        T = np.einsum("ab,jbc,dc->jad", Rinv, Gs, Rinv).reshape(n, -1)
        H = Glw.T @ Glw + T @ T.T
        # a free direction (e.g. lossless antiparallel DC links) makes H singular: add a small ridge
        H_factor = None
        for ridge in (0.0, 1e-14, 1e-12, 1e-10):
            try:
                H_factor = sla.cho_factor(H + ridge * np.trace(H) / n * np.eye(n))
                break
            except np.linalg.LinAlgError:
                continue
        if H_factor is None:
            status = "stalled"
            break

        def H_solve(r):
            return sla.cho_solve(H_factor, r)

        lam_pair = lam_s[:, None] + lam_s[None, :]

        def direction(rc_l, rc_s):
            u_l = rc_l / lam_l
            u_s = 2 * rc_s / lam_pair
            rhs = -rd - Gl.T @ (rpl / w**2 + u_l / w) - Gs_adj(W_inv @ rps @ W_inv + Rinv.T @ u_s @ Rinv)
            dx = H_solve(rhs)
            # one step of iterative refinement
            dx += H_solve(rhs - H @ dx)
            dz = (Gl @ dx + rpl) / w**2 + u_l / w
            dZ = _sym(Rinv.T @ (Rinv @ (Gs_op(dx) + rps) @ Rinv.T + u_s) @ Rinv)
            ds = -(Gl @ dx + rpl)
            dS = _sym(-(Gs_op(dx) + rps))
            return dx, ds, dS, dz, dZ

        def scaled(ds, dS, dz, dZ):
            return ds / w, Rinv @ dS @ Rinv.T, w * dz, R.T @ dZ @ R

        def step_length(ds_t, dS_t, dz_t, dZ_t):
            a = min(_max_step_lin(lam_l, ds_t), _max_step_lin(lam_l, dz_t),
                    _max_step_psd(lam_s, dS_t), _max_step_psd(lam_s, dZ_t))
            return a

        # predictor
        dx, ds, dS, dz, dZ = direction(-lam_l**2, -np.diag(lam_s**2))
        ds_t, dS_t, dz_t, dZ_t = scaled(ds, dS, dz, dZ)
        a_aff = min(1.0, step_length(ds_t, dS_t, dz_t, dZ_t))
        gap_aff = (s + a_aff * ds) @ (z + a_aff * dz) + np.sum((S + a_aff * dS) * (Z + a_aff * dZ))
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3

        # corrector
        rc_l = sigma * mu - lam_l**2 - ds_t * dz_t
        rc_s = sigma * mu * np.eye(q) - np.diag(lam_s**2) - _sym(dS_t @ dZ_t)
        dx, ds, dS, dz, dZ = direction(rc_l, rc_s)
        ds_t, dS_t, dz_t, dZ_t = scaled(ds, dS, dz, dZ)
        alpha = min(1.0, st.step_fraction * step_length(ds_t, dS_t, dz_t, dZ_t))

        # near the optimum the eigenvalue step bound can be off by round-off; backtrack before giving up
        for _ in range(10):
            x_new = x + alpha * dx
            s_new = s + alpha * ds
            z_new = z + alpha * dz
            S_new = _sym(S + alpha * dS)
            Z_new = _sym(Z + alpha * dZ)
            if np.all(s_new > 0) and np.all(z_new > 0) and _psd_ok(S_new) and _psd_ok(Z_new):
                break
            alpha *= 0.5
        else:
            status = "stalled"
            break
        x, s, z, S, Z = x_new, s_new, z_new, S_new, Z_new
        stall = stall + 1 if alpha < 1e-8 else 0
        if stall >= 5:
            status = "stalled"
            break

    if status != "optimal":
        _, x, s, S, z, Z, gap, relgap, pres, dres = best
    return _unscale(problem, x, s, S, z, Z, status, gap, relgap, pres, dres, it, history)


def _unscale(problem, x, s, S, z, Z, status, gap, relgap, pres, dres, it, history) -> SdpSolution:
    qcqp = problem.qcqp
    N, D = qcqp.n_bus, qcqp.n_dc
    V = vec_to_hermitian(x[: N * N], N)
    p = x[N * N:].copy()
    lam = z * problem.row_scale / problem.obj_scale
    psi = 2 * unembed(Z) / problem.obj_scale
    obj = qcqp.objective
    value = float(np.real(np.trace(obj.C @ V)) + obj.c @ p + obj.const)
    dual = float(-problem.h_lin @ z / problem.obj_scale + obj.const)
    slack = s / problem.row_scale
    comp = float(np.max(lam * slack, initial=0.0))
    return SdpSolution(V=V, p=p, lam=lam, status=status, gap=float(relgap), objective=value,
                       dual_objective=dual, psi=psi, primal_residual=float(pres),
                       dual_residual=float(dres), comp_slack=comp, iterations=it, history=history)


def solve_qcqp_relaxation(qcqp: CanonicalQcqp, settings: Optional[SolverSettings] = None) -> SdpSolution:
    return solve(embed(qcqp), settings)
