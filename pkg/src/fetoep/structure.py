"""
Two-level Toeplitz matrices generated by the five-point symbol ``f`` and
the hexagonal symbol ``f~``, lattice embeddings of the structured hexagon
mesh into parallelograms, and the extreme-eigenvalue checks built on them.

Lattice convention
------------------
A structured hexagon mesh with spacing ``h`` and centre ``c`` has its nodes
at ``c + p * (h, 0) + q * (-h/2, h*sqrt(3)/2)`` for integers ``(p, q)``.
In these coordinates the six mesh neighbours of a node sit at offsets
``(+-1, 0)``, ``(0, +-1)`` and ``+-(1, 1)``, which are exactly the nonzero
Fourier offsets of ``f~``. The Toeplitz row of site ``(p, q)`` inside an
``N1 x N2`` box anchored at ``(p0, q0)`` is ``(p - p0) * N2 + (q - q0)``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import InvalidParameterError, SizeError, UnsupportedMeshError
from .mesh import Mesh, generate_hex_structured, generate_square_fk

SQRT3 = np.sqrt(3.0)
DENSE_LIMIT = 4096
SPARSE_LIMIT = 10_000_000


@dataclass(frozen=True)
class Symbol:
    """Real even trigonometric polynomial on ``(-pi, pi]^2`` given by its
    Fourier coefficients ``{(j1, j2): a_j}``."""

    name: str
    coefficients: dict

    def __call__(self, s1, s2):
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        out = np.zeros(np.broadcast(s1, s2).shape)
        for (j1, j2), c in self.coefficients.items():
            out = out + c * np.cos(j1 * s1 + j2 * s2)
        return out


F = Symbol("F", {(0, 0): 4.0, (1, 0): -1.0, (-1, 0): -1.0, (0, 1): -1.0, (0, -1): -1.0})

_t = -SQRT3 / 3.0
FTILDE = Symbol(
    "Ftilde",
    {(0, 0): 2.0 * SQRT3, (1, 0): _t, (-1, 0): _t, (0, 1): _t, (0, -1): _t, (1, 1): _t, (-1, -1): _t},
)
SYMBOLS = {"F": F, "Ftilde": FTILDE}


def _symbol(symbol):
    if isinstance(symbol, Symbol):
        return symbol
    try:
        return SYMBOLS[symbol]
    except KeyError:
        raise InvalidParameterError(f"unknown symbol {symbol!r}") from None


def build_toeplitz(symbol, n1: int, n2: int) -> sp.csr_matrix:
    """Two-level Toeplitz matrix ``T_{(n1, n2)}(symbol)``.

    Entry ``((k1, k2), (l1, l2))`` is the Fourier coefficient at offset
    ``(k1 - l1, k2 - l2)``; row ``(k1, k2)`` is numbered ``k1 * n2 + k2``.
    """
    symbol = _symbol(symbol)
    if n1 < 1 or n2 < 1:
        raise InvalidParameterError("Toeplitz orders must be >= 1")
    if n1 * n2 > SPARSE_LIMIT:
        raise SizeError(f"Toeplitz order {n1 * n2} exceeds {SPARSE_LIMIT}")
    out = sp.csr_matrix((n1 * n2, n1 * n2))
    for (d1, d2), c in symbol.coefficients.items():
        if abs(d1) >= n1 or abs(d2) >= n2:
            continue
        block = sp.kron(sp.eye(n1, k=-d1, format="csr"), sp.eye(n2, k=-d2, format="csr"), format="csr")
        out = out + c * block
    out = sp.csr_matrix(out)
    out.sum_duplicates()
    out.sort_indices()
    return out


def toeplitz_on_sites(symbol, sites) -> sp.csr_matrix:
    """Principal submatrix of an (unbounded) Toeplitz matrix on integer
    lattice ``sites``, in the given order."""
    symbol = _symbol(symbol)
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    n = len(sites)
    lo = sites.min(axis=0) - 1
    width = int(sites[:, 1].max() - lo[1]) + 2
    keys = (sites[:, 0] - lo[0]) * width + (sites[:, 1] - lo[1])
    order = np.argsort(keys)
    sorted_keys = keys[order]
    if np.any(np.diff(sorted_keys) == 0):
        raise InvalidParameterError("lattice sites must be distinct")
    rows, cols, vals = [], [], []
    for (d1, d2), c in symbol.coefficients.items():
        target = keys - (d1 * width + d2)
        pos = np.searchsorted(sorted_keys, target)
        pos = np.minimum(pos, n - 1)
        hit = sorted_keys[pos] == target
        rows.append(np.flatnonzero(hit))
        cols.append(order[pos[hit]])
        vals.append(np.full(int(hit.sum()), c))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProjectionMap:
    """Row selector ``Pi`` of shape ``(len(columns), n_cols)``: row ``r``
    is the canonical basis vector ``e_{columns[r]}``.

    ``lattice_dims`` is the ``(N1, N2)`` box of the parallelogram involved
    and ``origin`` its corner ``(p0, q0)`` in lattice coordinates.
    """

    columns: np.ndarray
    n_cols: int
    lattice_dims: tuple
    origin: tuple
    sites: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return (len(self.columns), self.n_cols)

    def matrix(self) -> sp.csr_matrix:
        n = len(self.columns)
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.columns)), shape=self.shape)

    def project(self, mat) -> sp.csr_matrix:
        """``Pi @ mat @ Pi.T`` as a principal submatrix extraction."""
        mat = sp.csr_matrix(mat)
        out = mat[self.columns][:, self.columns].tocsr()
        out.sort_indices()
        return out


def hex_lattice_coords(mesh: Mesh):
    """Integer ``(p, q)`` coordinates of every node of a structured hexagon mesh."""
    if mesh.family != "hex":
        raise UnsupportedMeshError(f"lattice embedding needs a structured hexagon mesh, got {mesh.family!r}")
    h = mesh.h
    rel = mesh.nodes - mesh.nodes.mean(axis=0)
    q = 2.0 * rel[:, 1] / (SQRT3 * h)
    p = rel[:, 0] / h + 0.5 * q
    pq = np.rint(np.column_stack([p, q])).astype(np.int64)
    back = pq[:, :1] * np.array([h, 0.0]) + pq[:, 1:] * np.array([-0.5 * h, 0.5 * SQRT3 * h])
    if np.abs(back - rel).max() > 1e-12 * max(1.0, 1.0 / h) * h:
        raise UnsupportedMeshError("mesh nodes do not lie on the equilateral lattice")
    return pq


def _largest_rectangle(mask):
    """Largest all-True axis-aligned rectangle of a boolean grid.

    Returns ``(r0, c0, rows, cols)``; ties go to the first rectangle found
    scanning rows top to bottom.
    """
    n_r, n_c = mask.shape
    heights = np.zeros(n_c, dtype=np.int64)
    best = (0, 0, 0, 0)
    best_area = 0
    for r in range(n_r):
        heights = np.where(mask[r], heights + 1, 0)
        stack = []
        for c in range(n_c + 1):
            cur = heights[c] if c < n_c else 0
            start = c
            while stack and stack[-1][1] > cur:
                s, hgt = stack.pop()
                area = hgt * (c - s)
                if area > best_area:
                    best_area = area
                    best = (r - hgt + 1, s, int(hgt), c - s)
                start = s
            if not stack or stack[-1][1] < cur:
                stack.append((start, cur))
    return best


def embed_hex(mesh: Mesh):
    """Outer and inner parallelogram embeddings of a structured hexagon.

    Returns ``(outer, inner)``. ``outer`` (``n x N``) maps each interior
    node to its site in the smallest lattice box holding all interior
    nodes, so ``A_n(1) = outer A_N`` with ``A_N = T_N(f~)``. ``inner``
    (``Ntilde x n``) picks the interior nodes forming the largest lattice
    box made only of interior nodes.
    """
    pq = hex_lattice_coords(mesh)[mesh.interior_nodes]
    lo = pq.min(axis=0)
    dims = tuple(int(v) for v in pq.max(axis=0) - lo + 1)
    local = pq - lo
    cols = local[:, 0] * dims[1] + local[:, 1]
    outer = ProjectionMap(cols, dims[0] * dims[1], dims, tuple(int(v) for v in lo), pq)

    grid = np.full(dims, -1, dtype=np.int64)
    grid[local[:, 0], local[:, 1]] = np.arange(len(pq))
    r0, c0, nr, nc = _largest_rectangle(grid >= 0)
    box = grid[r0 : r0 + nr, c0 : c0 + nc]
    inner_sites = np.array([(lo[0] + r0 + a, lo[1] + c0 + b) for a in range(nr) for b in range(nc)])
    inner = ProjectionMap(
        box.ravel(), len(pq), (nr, nc), (int(lo[0] + r0), int(lo[1] + c0)), inner_sites.reshape(-1, 2)
    )
    return outer, inner


# ---------------------------------------------------------------------------
# Eigenvalue checks
# ---------------------------------------------------------------------------

def _dense(mat):
    n = mat.shape[0]
    if n > DENSE_LIMIT:
        raise SizeError(f"dense eigensolver limited to n <= {DENSE_LIMIT}, got {n}")
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat)


def eigvalsh(mat):
    return scipy.linalg.eigvalsh(_dense(mat))


def lambda_min_laplacian(n1, n2=None):
    """Closed-form smallest eigenvalue of ``T_{(n1, n2)}(f)``."""
    n2 = n1 if n2 is None else n2
    return 4.0 * np.sin(np.pi / (2 * (n1 + 1))) ** 2 + 4.0 * np.sin(np.pi / (2 * (n2 + 1))) ** 2


@dataclass
class SandwichReport:
    dims: tuple
    lower_gap: float  # lambda_min(T(f~) - T(f) / sqrt(3))
    upper_gap: float  # lambda_min(sqrt(3) T(f) - T(f~))

    @property
    def passed(self):
        return self.lower_gap > 0 and self.upper_gap > 0


def sandwich_check(n1: int, n2: int) -> SandwichReport:
    """Smallest eigenvalues of the two differences bracketing ``T(f~)``."""
    if n1 * n2 > DENSE_LIMIT:
        raise SizeError(f"sandwich check limited to n <= {DENSE_LIMIT}")
    tf = build_toeplitz(F, n1, n2)
    tt = build_toeplitz(FTILDE, n1, n2)
    lower = eigvalsh(tt - tf / SQRT3)[0]
    upper = eigvalsh(SQRT3 * tf - tt)[0]
    return SandwichReport((n1, n2), float(lower), float(upper))


@dataclass
class MinEigenvalueSandwich:
    """``lambda_min(T_N(f~)) <= lambda_min(A_n(1)) <= lambda_min(T_Ntilde(f~))``
    together with the ``f``-based outer bounds."""

    n: int
    outer_dims: tuple
    inner_dims: tuple
    outer: float
    matrix: float
    inner: float
    lower_bound: float
    upper_bound: float

    @property
    def holds(self):
        tol = 1e-12 * max(1.0, abs(self.inner))
        return (
            self.lower_bound - tol <= self.outer <= self.matrix + tol
            and self.matrix <= self.inner + tol
            and self.inner <= self.upper_bound + tol
        )


def min_eigenvalue_sandwich(mesh: Mesh) -> MinEigenvalueSandwich:
    from .assembly import assemble_diffusion

    outer, inner = embed_hex(mesh)
    a_one = assemble_diffusion(mesh, 1.0)
    lo = eigvalsh(build_toeplitz(FTILDE, *outer.lattice_dims))[0]
    mid = eigvalsh(a_one)[0]
    hi = eigvalsh(build_toeplitz(FTILDE, *inner.lattice_dims))[0]
    return MinEigenvalueSandwich(
        n=mesh.n,
        outer_dims=outer.lattice_dims,
        inner_dims=inner.lattice_dims,
        outer=float(lo),
        matrix=float(mid),
        inner=float(hi),
        lower_bound=float(lambda_min_laplacian(*outer.lattice_dims) / SQRT3),
        upper_bound=float(SQRT3 * lambda_min_laplacian(*inner.lattice_dims)),
    )


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def structured_mesh(family, m):
    if family in ("hex", "hexagon"):
        return generate_hex_structured(m)
    if family in ("square-fk", "square"):
        return generate_square_fk(m)
    raise InvalidParameterError(f"unknown structured family {family!r}")


@dataclass
class LawReport:
    family: str
    rows: list  # (m, n, h, lambda_min, lambda_max, cond)
    slope_min: float
    slope_cond: float

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["family", "m", "n", "h", "lambda_min", "lambda_max", "cond2"])
        for row in self.rows:
            w.writerow([self.family, row[0], row[1]] + [repr(float(v)) for v in row[2:]])
        return buf.getvalue()


def lambda_min_law(family, ms) -> LawReport:
    """Extreme eigenvalues and condition number of ``A_n(1)`` over a
    refinement sequence, with fitted log-log slopes against ``h``."""
    from .assembly import assemble_diffusion

    rows = []
    for m in ms:
        mesh = structured_mesh(family, m)
        ev = eigvalsh(assemble_diffusion(mesh, 1.0))
        rows.append((m, mesh.n, mesh.h, ev[0], ev[-1], ev[-1] / ev[0]))
    hs = [r[2] for r in rows]
    return LawReport(
        family,
        rows,
        loglog_slope(hs, [r[3] for r in rows]),
        loglog_slope(hs, [r[5] for r in rows]),
    )
