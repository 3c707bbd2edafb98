"""
Dense spectral diagnostics for preconditioned systems: Hermitian /
skew-Hermitian splitting, cluster and outlier counts, eigenvector
conditioning for constant coefficients, and h-scaling scans.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import assemble_convection, assemble_diffusion, is_symmetric
from .coefficients import CoefficientField, as_field
from .errors import InvalidParameterError, SizeError
from .precond import Preconditioner, build_exact
from .structure import DENSE_LIMIT, loglog_slope, structured_mesh

EPSILONS = (0.1, 0.05)


def hss_split(A):
    """``(H, S)`` with ``H = (A + A^T)/2`` symmetric and ``S = (A - A^T)/2``
    skew-symmetric."""
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidParameterError("HSS splitting needs a square matrix")
    At = A.T.tocsr()
    H = ((A + At) * 0.5).tocsr()
    S = ((A - At) * 0.5).tocsr()
    for M in (H, S):
        M.eliminate_zeros()
        M.sort_indices()
    return H, S


def _dense(mat):
    n = mat.shape[0]
    if n > DENSE_LIMIT:
        raise SizeError(f"dense diagnostics limited to n <= {DENSE_LIMIT}, got {n}")
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat)


def _canonical(ev):
    ev = np.asarray(ev, dtype=complex)
    return ev[np.lexsort((ev.imag, ev.real))]


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray = field(repr=False)
    center: complex
    outliers: dict
    min_real: float
    max_real: float
    max_abs_imag: float
    max_abs: float

    @classmethod
    def from_eigenvalues(cls, ev, center=1.0, epsilons=EPSILONS):
        ev = _canonical(ev)
        dist = np.abs(ev - center)
        return cls(
            eigenvalues=ev,
            center=center,
            outliers={eps: int((dist >= eps).sum()) for eps in epsilons},
            min_real=float(ev.real.min()),
            max_real=float(ev.real.max()),
            max_abs_imag=float(np.abs(ev.imag).max()),
            max_abs=float(np.abs(ev).max()),
        )

    def scatter_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im"])
        for z in self.eigenvalues:
            w.writerow([repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()

    def summary_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "center", "eps", "outliers", "min_real", "max_real", "max_abs_imag"])
        for eps, count in self.outliers.items():
            w.writerow(
                [len(self.eigenvalues), repr(complex(self.center)), eps, count,
                 repr(self.min_real), repr(self.max_real), repr(self.max_abs_imag)]
            )
        return buf.getvalue()


def preconditioned_spectrum(A, P: Preconditioner, part="full", center=None, epsilons=EPSILONS) -> SpectrumReport:
    """Eigenvalues of ``P^{-1} X`` where ``X`` is ``A`` (``part="full"``),
    ``Re(A) = (A + A^T)/2`` (``"real"``) or ``Im(A) = (A - A^T)/(2i)``
    (``"imag"``).

    Hermitian ``X`` goes through the generalized symmetric eigensolver on
    ``(X, P)``; otherwise ``P^{-1} A`` is formed explicitly.
    """
    if part not in ("full", "real", "imag"):
        raise InvalidParameterError(f"unknown part {part!r}")
    if center is None:
        center = 0.0 if part == "imag" else 1.0
    Pd = _dense(P.matrix())
    if part == "full" and not is_symmetric(A):
        ev = scipy.linalg.eigvals(P.apply_inverse(_dense(A)))
    elif part == "imag":
        _, S = hss_split(A)
        ev = scipy.linalg.eigh(-1j * _dense(S), Pd, eigvals_only=True)
    else:
        X = A if part == "full" else hss_split(A)[0]
        ev = scipy.linalg.eigh(_dense(X), Pd, eigvals_only=True)
    return SpectrumReport.from_eigenvalues(ev, center, epsilons)


def rayleigh_bounds(A, P: Preconditioner):
    """Extreme generalized Rayleigh quotients of ``(Re A, P)`` and ``(Im A, P)``.

    Every eigenvalue of ``P^{-1} A`` lies in the rectangle they span.
    """
    H, S = hss_split(A)
    Pd = _dense(P.matrix())
    re = scipy.linalg.eigh(_dense(H), Pd, eigvals_only=True)
    im = scipy.linalg.eigh(-1j * _dense(S), Pd, eigvals_only=True)
    return (float(re[0]), float(re[-1])), (float(im[0]), float(im[-1]))


# ---------------------------------------------------------------------------
# Eigenvectors for constant coefficients
# ---------------------------------------------------------------------------

@dataclass
class EigenvectorReport:
    n: int
    h: float
    cond_v: float
    cond_theta: float
    residual: float  # ||P^{-1}A V - V Lambda|| / ||V||

    @property
    def identity_error(self):
        """Relative gap between ``K2(V)`` and ``sqrt(K2(Theta_n(1)))``."""
        return abs(self.cond_v - np.sqrt(self.cond_theta)) / np.sqrt(self.cond_theta)


def _constant_value(field, vector):
    if isinstance(field, CoefficientField):
        if not field.is_constant:
            raise InvalidParameterError("eigenvector conditioning needs constant coefficients")
        return np.array(field.value) if vector else field.value[0]
    return np.asarray(field, dtype=float) if vector else float(field)


def eigenvector_conditioning(mesh, a=1.0, b=(0.0, 0.0)) -> EigenvectorReport:
    """``V_n = Theta_n(1)^{-1/2} Q_n`` diagonalizing ``P_n^{-1} A_n(a, b)``.

    With constant ``a`` and ``b``, ``P_n = a Theta_n(1)`` and
    ``P_n^{-1} A_n = Theta^{-1/2} (I + W) Theta^{1/2}`` with ``W`` skew, so
    ``I + W = Q D Q^H`` with ``Q`` unitary.
    """
    a = _constant_value(a, vector=False)
    b = _constant_value(b, vector=True)
    if not a > 0:
        raise InvalidParameterError("diffusion constant must be positive")
    theta = _dense(assemble_diffusion(mesh, 1.0))
    psi = _dense(assemble_convection(mesh, CoefficientField.constant(b)))
    lam, U = scipy.linalg.eigh(theta)
    inv_half = (U / np.sqrt(lam)) @ U.T
    W = inv_half @ psi @ inv_half / a
    W = 0.5 * (W - W.T)
    T, Q = scipy.linalg.schur(np.eye(len(lam)) + W, output="complex")
    V = inv_half @ Q
    s = scipy.linalg.svdvals(V)
    lhs = np.linalg.solve(a * theta, a * theta + psi) @ V
    resid = np.linalg.norm(lhs - V * np.diag(T)) / np.linalg.norm(V)
    return EigenvectorReport(mesh.n, mesh.h, float(s[0] / s[-1]), float(lam[-1] / lam[0]), float(resid))


def eigenvector_law(family, ms, a=1.0, b=(1.0, 1.0)):
    rows = [eigenvector_conditioning(structured_mesh(family, m), a, b) for m in ms]
    return rows, loglog_slope([r.h for r in rows], [r.cond_v for r in rows])


# ---------------------------------------------------------------------------
# h-scaling scans
# ---------------------------------------------------------------------------

def power_norm2(E, iterations=50, tol=1e-8, seed=0):
    """Spectral norm estimate by power iteration on ``E^T E``."""
    E = sp.csr_matrix(E)
    if E.nnz == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(E.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = E.T @ (E @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = np.sqrt(nw)
        v = w / nw
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(est)


def inf_norm(M):
    M = sp.csr_matrix(M)
    if M.nnz == 0:
        return 0.0
    return float(abs(M).sum(axis=1).max())


@dataclass
class ScanReport:
    label: str
    rows: list  # (m, n, h, value, value2)
    slope: float

    def to_csv(self, names=("inf_norm", "two_norm")):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "m", "n", "h", *names])
        for m, n, h, *vals in self.rows:
            w.writerow([self.label, m, n, repr(float(h)), *[repr(float(v)) for v in vals]])
        return buf.getvalue()


def skew_norm_scan(family, b, ms) -> ScanReport:
    """Norms of ``E_n(b) = (Psi_n(b) + Psi_n(b)^T) / 2`` over refinements and
    the log-log slope of the infinity norm against ``h``."""
    field = as_field(b, vector=True)
    rows = []
    for m in ms:
        mesh = structured_mesh(family, m)
        psi = assemble_convection(mesh, field)
        E, _ = hss_split(psi)
        rows.append((m, mesh.n, mesh.h, inf_norm(E), power_norm2(E)))
    vals = [r[3] for r in rows]
    slope = loglog_slope([r[2] for r in rows], vals) if min(vals) > 0 else float("inf")
    return ScanReport(f"{family}:E_n({field.id})", rows, slope)


def scaled_stiffness_defect(mesh, a):
    """``||D^{-1/2} Theta_n(a) D^{-1/2} - Theta_n(1)||_inf``."""
    theta = assemble_diffusion(mesh, a)
    a_one = assemble_diffusion(mesh, 1.0)
    P = build_exact(mesh, a, theta=theta, a_one=a_one)
    dinv = sp.diags(1.0 / P.d_half)
    return inf_norm(dinv @ theta @ dinv - a_one)


def scaled_defect_scan(family, a, ms) -> ScanReport:
    field = as_field(a)
    rows = []
    for m in ms:
        mesh = structured_mesh(family, m)
        d = scaled_stiffness_defect(mesh, field)
        rows.append((m, mesh.n, mesh.h, d, d))
    return ScanReport(f"{family}:scaled-defect({field.id})", rows,
                      loglog_slope([r[2] for r in rows], [r[3] for r in rows]))
