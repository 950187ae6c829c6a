"""nsCRAIG solver for nonsymmetric generalized saddle point systems.

The right basis is fully orthogonalized (modified Gram-Schmidt in the N
inner product) and kept in memory; solution assembly is deferred until the
stopping rule fires, then done with one Hessenberg solve and one bidiagonal
back substitution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .craig import ResidualCheckReport, _residual_check  # noqa: F401
from .errors import BreakdownError, InsufficientHistoryError, ZeroRhsError
from .gkb import assemble_bidiagonal, assemble_hessenberg
from .linops import SpdPreconditioner, as_dense
from .system import ConvergenceRecord, SolveResult, SolverConfig


@dataclass
class HessenbergFactors:
    """Assembled small factors of a nsCRAIG run."""

    B: np.ndarray
    H: np.ndarray

    def lower_factor(self):
        """Unit lower triangular L with H = B^T L^T, extracted by triangular solve."""
        Lt = scipy.linalg.solve_triangular(self.B.T, self.H, lower=True)
        return Lt.T


def assemble_solution(alphas, betas, h_columns, beta1, method="triangular"):
    """Solve for the small coefficient vector y with B y = -z, H z = beta_1 e1.

    'triangular' exploits H = B^T L^T (forward substitution for the chi
    recursion, one back substitution with L^T); 'dense' solves the assembled
    Hessenberg with row-pivoted elimination as a cross-check.
    """
    k = len(alphas)
    B = assemble_bidiagonal(alphas, betas, k)
    if method == "dense":
        H = assemble_hessenberg(h_columns, betas, k)
        e1 = np.zeros(k)
        e1[0] = beta1
        try:
            z = np.linalg.solve(H, e1)
        except np.linalg.LinAlgError as exc:
            raise BreakdownError(f"singular Hessenberg block: {exc}") from exc
    else:
        x = np.empty(k)
        x[0] = beta1 / alphas[0]
        for i in range(1, k):
            x[i] = -(betas[i] / alphas[i]) * x[i - 1]
        H = assemble_hessenberg(h_columns, betas, k)
        Lt = scipy.linalg.solve_triangular(B.T, H, lower=True)
        z = scipy.linalg.solve_triangular(Lt, x, lower=False)
    y = scipy.linalg.solve_triangular(B, -z, lower=False)
    return y


def nscraig_solve(sys, N=None, cfg=None):
    """Run nsCRAIG; symmetric instances are accepted and match craig's iterates.

    Iterates are assembled only on termination unless cfg.keep_iterates turns
    on the eager mode (every iteration, for replay diagnostics).
    """
    cfg = cfg or SolverConfig()
    if not np.any(sys.b):
        raise ZeroRhsError("b must be nonzero")
    N = N or SpdPreconditioner.identity(sys.n)
    A, C, Mmat, M = sys.A, sys.C, sys.Mmat, sys.M
    t0 = time.perf_counter()

    q = N.solve(sys.b)
    beta1 = float(np.sqrt(max(q @ sys.b, 0.0)))
    if beta1 == 0.0:
        raise ZeroRhsError("b has zero N^{-1}-norm")
    q = q / beta1
    Q, NQ = [q], [N.apply(q)]
    w = M.solve(A.matvec(q))
    r = q.copy()
    s = C.matvec(r)
    alpha = float(np.sqrt(max(w @ Mmat.matvec(w) + r @ s, 0.0)))

    alphas, betas, chis = [alpha], [beta1], []
    h_columns = []
    history = []
    u_list = [] if cfg.keep_iterates else None
    p_list = [] if cfg.keep_iterates else None

    if alpha <= cfg.breakdown_tol * max(beta1, 1.0):
        return SolveResult(np.zeros(sys.m), np.zeros(sys.n), 0, "breakdown",
                           history, alphas=alphas, betas=betas, chis=chis)

    v = w / alpha
    t = s / alpha
    chi = beta1 / alpha
    chis.append(chi)

    def make_iterate(k):
        y = assemble_solution(alphas[:k], betas, h_columns, beta1)
        p = np.column_stack(Q[:k]) @ y
        u = -M.solve(A.matvec(p))
        return u, p

    k = 1
    termination = "max-iterations"
    fired = None
    while True:
        g = N.solve(A.rmatvec(v) + t)
        h = np.zeros(k)
        for j in range(k):
            c = NQ[j] @ g
            g = g - c * Q[j]
            h[j] = c
        if cfg.second_pass:
            for j in range(k):
                c = NQ[j] @ g
                g = g - c * Q[j]
                h[j] += c
        h_columns.append(h)
        beta = float(np.sqrt(max(g @ N.apply(g), 0.0)))
        betas.append(beta)

        if cfg.keep_iterates:
            ui, pi = make_iterate(k)
            u_list.append(ui)
            p_list.append(pi)

        res_rel = (beta / beta1) * abs(chi)
        err_est = None
        if cfg.wants_error_estimate and k >= cfg.error_delay:
            B = assemble_bidiagonal(alphas, betas, k)
            H = assemble_hessenberg(h_columns, betas, k)
            Lt = scipy.linalg.solve_triangular(B.T, H, lower=True)
            err_est = nscraig_error_estimate(chis, Lt.T, k, cfg.error_delay)
        history.append(ConvergenceRecord(k, res_rel, err_est, alphas[-1], beta, chi,
                                         time.perf_counter() - t0))

        if beta <= cfg.breakdown_tol * beta1:
            termination = "exact-termination"
            break
        if cfg.wants_residual and res_rel < cfg.tolerance:
            termination, fired = "converged", "relative-residual"
            break
        if cfg.wants_error_estimate and err_est is not None and abs(err_est) < cfg.tolerance:
            termination, fired = "converged", "error-estimate"
            break
        if k >= cfg.max_iterations:
            termination = "max-iterations"
            break

        q = g / beta
        Q.append(q)
        NQ.append(N.apply(q))
        w = M.solve(A.matvec(q) - beta * Mmat.matvec(v))
        r = q - (beta / alphas[-1]) * r
        s = C.matvec(r)
        alpha = float(np.sqrt(max(w @ Mmat.matvec(w) + r @ s, 0.0)))
        if alpha <= cfg.breakdown_tol * alphas[0]:
            termination = "breakdown"
            break
        alphas.append(alpha)
        v = w / alpha
        t = s / alpha
        chi = -(beta / alpha) * chi
        chis.append(chi)
        k += 1

    if cfg.keep_iterates:
        u, p = u_list[-1], p_list[-1]
    else:
        u, p = make_iterate(min(k, len(alphas)))
    return SolveResult(u, p, k, termination, history, fired_criterion=fired,
                       alphas=alphas, betas=betas, chis=chis, h_columns=h_columns,
                       u_iterates=u_list, p_iterates=p_list,
                       basis={"Q": Q} if cfg.keep_iterates else None)


def nscraig_error_estimate(chis, lower_factor, k, d):
    """Delayed relative energy-error estimate for nsCRAIG.

    Solves L^T z = x by back substitution (x holds chi_1..chi_k) and returns
    sum(chi_i z_i, i = k-d+1..k) / sum(chi_i z_i, i = 1..k). The ratio can be
    negative or exceed 1: no minimization property holds here.
    """
    if d < 1:
        raise ValueError("delay d must be >= 1")
    if k < d or len(chis) < k:
        raise InsufficientHistoryError(f"need k >= d and {k} recorded chis")
    L = as_dense(lower_factor)
    if L.shape != (k, k):
        raise InsufficientHistoryError(f"lower factor must be {k} x {k}")
    x = np.asarray(chis[:k], dtype=float)
    z = scipy.linalg.solve_triangular(L.T, x, lower=False)
    terms = x * z
    total = float(terms.sum())
    if total == 0.0:
        raise ValueError("zero denominator in error estimate")
    return float(terms[k - d:].sum()) / total


def nscraig_residual_check(sys, N, result):
    """Replay diagnostics for nsCRAIG, using the chi recurrence estimates."""
    return _residual_check(sys, N, result)
