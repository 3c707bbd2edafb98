"""
Diagonal-times-core preconditioners ``P = D^{1/2} C D^{1/2}``.

For the exact kind ``C = A_n(1)``, the constant-coefficient stiffness matrix
on the same mesh, and ``D = diag(Theta_n(a)) / diag(A_n(1))``. The surrogate
kind replaces ``C`` by a principal submatrix of the hexagonal Toeplitz
matrix ``T(f~)``, picked by matching mesh nodes to lattice sites.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import ConvexHull, cKDTree

from .assembly import assemble_diffusion
from .errors import InvalidParameterError, NotPositiveDefiniteError
from .mesh import Mesh
from .structure import FTILDE, SQRT3, toeplitz_on_sites


class CoreFactor:
    """Sparse LU of an SPD matrix in symmetric mode: fill-reducing
    minimum-degree ordering on ``A + A^T`` and no row pivoting, so the
    factorization is a Cholesky-type ``L D L^T`` with positive pivots."""

    def __init__(self, mat):
        mat = sp.csc_matrix(mat)
        try:
            lu = spla.splu(
                mat,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NotPositiveDefiniteError(f"factorization failed: {exc}") from exc
        pivots = lu.U.diagonal()
        if not np.array_equal(lu.perm_r, lu.perm_c) or np.any(pivots <= 0):
            raise NotPositiveDefiniteError("core matrix is not symmetric positive definite")
        self._lu = lu

    @property
    def lower(self):
        """Unit lower-triangular factor in the permuted ordering."""
        return self._lu.L

    def solve(self, rhs):
        return self._lu.solve(np.asarray(rhs, dtype=float))


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """Factorized ``P = diag(d_half) core diag(d_half)``.

    ``kind`` is ``"exact"``, ``"surrogate"`` or ``"none"`` (the identity).
    """

    kind: str
    d_half: np.ndarray
    core: sp.csr_matrix
    factor: CoreFactor = field(repr=False)
    sites: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.d_half)

    def _scale(self, v):
        return self.d_half[:, None] if np.ndim(v) == 2 else self.d_half

    def apply_inverse(self, v):
        """``P^{-1} v``; ``v`` may be a vector or an ``(n, k)`` block."""
        if self.kind == "none":
            return np.array(v, dtype=float)
        d = self._scale(v)
        return self.factor.solve(np.asarray(v, dtype=float) / d) / d

    def matvec(self, v):
        if self.kind == "none":
            return np.array(v, dtype=float)
        d = self._scale(v)
        return d * (self.core @ (d * np.asarray(v, dtype=float)))

    def matrix(self) -> sp.csr_matrix:
        dh = sp.diags(self.d_half)
        return sp.csr_matrix(dh @ self.core @ dh)


def scaling_diagonal(theta_a, a_one) -> np.ndarray:
    """``diag(Theta_n(a)) / diag(A_n(1))``."""
    num = np.asarray(sp.csr_matrix(theta_a).diagonal(), dtype=float)
    den = np.asarray(sp.csr_matrix(a_one).diagonal(), dtype=float)
    if num.shape != den.shape:
        raise InvalidParameterError("matrix orders differ")
    if np.any(~(num > 0)) or np.any(~(den > 0)):
        raise NotPositiveDefiniteError("nonpositive diagonal entry in scaling input")
    return num / den


def from_core(kind, theta_a, core, sites=None) -> Preconditioner:
    d = scaling_diagonal(theta_a, core)
    core = sp.csr_matrix(core)
    return Preconditioner(kind, np.sqrt(d), core, CoreFactor(core), sites)


def build_exact(mesh: Mesh, a=1.0, theta=None, a_one=None) -> Preconditioner:
    """``P_n(a) = D^{1/2} A_n(1) D^{1/2}``; pass ``theta``/``a_one`` to reuse
    already assembled matrices."""
    if mesh.n < 1:
        raise InvalidParameterError("mesh has no interior nodes")
    theta = assemble_diffusion(mesh, a) if theta is None else theta
    a_one = assemble_diffusion(mesh, 1.0) if a_one is None else a_one
    return from_core("exact", theta, a_one)


def identity(n) -> Preconditioner:
    eye = sp.identity(n, format="csr")
    return Preconditioner("none", np.ones(n), eye, None)


def mean_interior_edge_length(mesh: Mesh) -> float:
    edges, counts, _ = mesh.edges()
    inner = edges[counts == 2]
    d = mesh.nodes[inner[:, 0]] - mesh.nodes[inner[:, 1]]
    return float(np.sqrt((d ** 2).sum(axis=1)).mean())


def area_spacing(mesh: Mesh) -> float:
    """Side of the equilateral triangle whose area is the mean triangle area.

    Unlike the mean edge length this is unbiased under node jitter with a
    fixed boundary, since the total area does not change.
    """
    return float(np.sqrt(4.0 * mesh.signed_areas().sum() / (SQRT3 * mesh.n_triangles)))


SPACING_RULES = {"edge": mean_interior_edge_length, "area": area_spacing}


def domain_centroid(mesh: Mesh):
    area = mesh.signed_areas()
    bary = mesh.nodes[mesh.triangles].mean(axis=1)
    return (area[:, None] * bary).sum(axis=0) / area.sum()


def _lattice_sites_inside(mesh, spacing, origin):
    """Lattice sites strictly inside the (convex) domain, as ``(pq, xy)``."""
    hull = ConvexHull(mesh.nodes)
    lo = mesh.nodes.min(axis=0) - origin
    hi = mesh.nodes.max(axis=0) - origin
    qmax = int(np.ceil(2.0 * max(abs(lo[1]), abs(hi[1])) / (SQRT3 * spacing))) + 1
    pmax = int(np.ceil(max(abs(lo[0]), abs(hi[0])) / spacing + 0.5 * qmax)) + 1
    p, q = np.meshgrid(np.arange(-pmax, pmax + 1), np.arange(-qmax, qmax + 1), indexing="ij")
    pq = np.column_stack([p.ravel(), q.ravel()])
    xy = origin + spacing * np.column_stack([pq[:, 0] - 0.5 * pq[:, 1], 0.5 * SQRT3 * pq[:, 1]])
    margin = 1e-9 * spacing
    inside = np.all(xy @ hull.equations[:, :2].T + hull.equations[:, 2] < -margin, axis=1)
    return pq[inside], xy[inside]


def assign_lattice_sites(points, site_xy):
    """Greedy nearest-site matching in point order; taken sites are skipped.

    Returns the chosen site index for each point, or ``None`` if there are
    fewer sites than points.
    """
    if len(points) > len(site_xy):
        return None
    tree = cKDTree(site_xy)
    taken = np.zeros(len(site_xy), dtype=bool)
    chosen = np.empty(len(points), dtype=np.int64)
    k = min(8, len(site_xy))
    _, cand = tree.query(points, k=k)
    cand = cand.reshape(len(points), -1)
    for i, x in enumerate(points):
        row = cand[i]
        free = row[~taken[row]]
        kk = k
        while free.size == 0:
            kk = min(2 * kk, len(site_xy))
            _, row = tree.query(x, k=kk)
            row = np.atleast_1d(row)
            free = row[~taken[row]]
        chosen[i] = free[0]
        taken[free[0]] = True
    return chosen


def build_surrogate(mesh: Mesh, a=1.0, theta=None, spacing="edge", max_refinements=3) -> Preconditioner:
    """``P~_n(a) = D^{1/2} C D^{1/2}`` with ``C`` a principal submatrix of
    ``T(f~)``.

    An equilateral lattice is centred at the domain centroid; each interior node,
    in index order, takes its nearest free lattice site inside the domain.
    ``spacing`` is a number or a rule name: ``"edge"`` (mean interior edge
    length) or ``"area"`` (see :func:`area_spacing`).
    ``C`` couples the chosen sites through the Fourier offsets of ``f~``
    and ``D = diag(Theta_n(a)) / diag(C)``. If sites run out the spacing is
    halved, at most ``max_refinements`` times. The domain must be convex.
    """
    theta = assemble_diffusion(mesh, a) if theta is None else theta
    if isinstance(spacing, str):
        if spacing not in SPACING_RULES:
            raise InvalidParameterError(f"unknown spacing rule {spacing!r}")
        spacing = SPACING_RULES[spacing](mesh)
    spacing = float(spacing)
    if not spacing > 0:
        raise InvalidParameterError("lattice spacing must be positive")
    origin = domain_centroid(mesh)
    points = mesh.nodes[mesh.interior_nodes]
    for _ in range(max_refinements + 1):
        pq, xy = _lattice_sites_inside(mesh, spacing, origin)
        chosen = assign_lattice_sites(points, xy)
        if chosen is not None:
            break
        spacing *= 0.5
    else:
        raise InvalidParameterError("could not assign every interior node to a lattice site")
    sites = pq[chosen]
    core = toeplitz_on_sites(FTILDE, sites)
    return from_core("surrogate", theta, core, sites)
