"""
Preconditioned conjugate gradients and full GMRES.

Both start from the zero vector and stop when the relative residual
drops to ``tol``: PCG measures the true residual ``b - A x_k``, GMRES the
left-preconditioned residual ``P^{-1}(b - A x_k)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BreakdownError
from .precond import identity

DEFAULT_TOL = 1e-7
MAXIT_CAP = 500


@dataclass
class SolveReport:
    method: str
    iterations: int
    converged: bool
    history: list = field(repr=False)
    x: np.ndarray = field(repr=False)
    true_relres: float
    time: float
    precond: str = "none"

    @property
    def relres(self):
        return self.history[-1]


def _default_maxit(n, maxit):
    return min(n, MAXIT_CAP) if maxit is None else int(maxit)


def pcg(A, b, P=None, tol=DEFAULT_TOL, maxit=None) -> SolveReport:
    """Preconditioned conjugate gradients for SPD ``A`` and ``P``.

    Raises
    ------
    BreakdownError
        If ``p^T A p <= 0`` or ``r^T P^{-1} r <= 0`` is met.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    P = identity(n) if P is None else P
    maxit = _default_maxit(n, maxit)
    x = np.zeros(n)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return SolveReport("pcg", 0, True, [0.0], x, 0.0, time.perf_counter() - t0, P.kind)

    r = b.copy()
    z = P.apply_inverse(r)
    rz = r @ z
    if not rz > 0:
        raise BreakdownError("preconditioned residual product r^T z <= 0 at start")
    p = z.copy()
    history = [1.0]
    converged = False
    k = 0
    while k < maxit:
        k += 1
        q = A @ p
        curv = p @ q
        if not curv > 0:
            raise BreakdownError(f"nonpositive curvature p^T A p = {curv:.3e} at iteration {k}")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * q
        history.append(float(np.linalg.norm(b - A @ x) / nb))
        if history[-1] <= tol:
            converged = True
            break
        z = P.apply_inverse(r)
        rz_new = r @ z
        if not rz_new > 0:
            raise BreakdownError(f"r^T P^-1 r = {rz_new:.3e} <= 0 at iteration {k}")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveReport("pcg", k, converged, history, x, history[-1], time.perf_counter() - t0, P.kind)


def pgmres(A, b, P=None, tol=DEFAULT_TOL, maxit=None) -> SolveReport:
    """Full (unrestarted) left-preconditioned GMRES, modified Gram-Schmidt
    Arnoldi and Givens rotations."""
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    P = identity(n) if P is None else P
    maxit = _default_maxit(n, maxit)
    x = np.zeros(n)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return SolveReport("pgmres", 0, True, [0.0], x, 0.0, time.perf_counter() - t0, P.kind)

    r0 = P.apply_inverse(b)
    beta = np.linalg.norm(r0)
    V = [r0 / beta]
    H = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    history = [1.0]
    converged = False
    k = 0
    while k < maxit:
        w = P.apply_inverse(A @ V[k])
        wnorm = np.linalg.norm(w)
        for j in range(k + 1):
            H[j, k] = w @ V[j]
            w -= H[j, k] * V[j]
        H[k + 1, k] = np.linalg.norm(w)
        lucky = H[k + 1, k] <= 1e-14 * wnorm
        if not lucky:
            V.append(w / H[k + 1, k])
        for j in range(k):
            hj, hj1 = H[j, k], H[j + 1, k]
            H[j, k] = cs[j] * hj + sn[j] * hj1
            H[j + 1, k] = -sn[j] * hj + cs[j] * hj1
        rho = np.hypot(H[k, k], H[k + 1, k])
        cs[k], sn[k] = H[k, k] / rho, H[k + 1, k] / rho
        H[k, k] = rho
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        k += 1
        history.append(float(abs(g[k]) / beta))
        if history[-1] <= tol or lucky:
            # lucky breakdown: the Krylov space is invariant, residual is ~0
            converged = True
            break
    y = scipy.linalg.solve_triangular(H[:k, :k], g[:k]) if k else np.zeros(0)
    x = np.array(V[:k]).T @ y if k else x
    true = float(np.linalg.norm(b - A @ x) / nb)
    return SolveReport("pgmres", k, converged, history, x, true, time.perf_counter() - t0, P.kind)


def solve(A, b, P=None, method="pcg", tol=DEFAULT_TOL, maxit=None) -> SolveReport:
    if method == "pcg":
        return pcg(A, b, P, tol, maxit)
    if method == "pgmres":
        return pgmres(A, b, P, tol, maxit)
    raise ValueError(f"unknown method {method!r}")
