"""
Linear finite element assembly of the diffusion matrix, the convection
matrix and the load vector with the one-point barycentric rule.

Boundary nodes carry homogeneous Dirichlet data and are removed: rows and
columns are indexed by ``Mesh.interior_index``. Global matrices are
``scipy.sparse.csr_matrix`` in canonical form (sorted indices, no
duplicates, no stored zeros).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coefficients import as_field
from .errors import CoefficientError, DegenerateElementError
from .mesh import Mesh


@dataclass(frozen=True)
class ElementMatrix:
    triangle: int
    stiffness: np.ndarray
    convection: np.ndarray
    dofs: np.ndarray


def _geometry(p):
    """Gradients of the nodal basis, areas and barycenters for ``(T, 3, 2)``
    vertex arrays.

    The basis gradient on vertex ``i`` is the opposite edge
    ``p[i+2] - p[i+1]`` rotated by +90 degrees over twice the signed area,
    which holds for either orientation.
    """
    e = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    signed = 0.5 * (e[:, 2, 0] * (-e[:, 1, 1]) - e[:, 2, 1] * (-e[:, 1, 0]))
    scale = np.abs(p).max(axis=(1, 2)) + np.abs(e).max(axis=(1, 2))
    degenerate = np.abs(signed) <= 1e-14 * scale ** 2
    if degenerate.any():
        k = int(np.flatnonzero(degenerate)[0])
        raise DegenerateElementError(f"triangle {k} has (numerically) zero area")
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * signed[:, None, None])
    return grads, np.abs(signed), p.mean(axis=1)


def _stiffness_batch(p, a):
    grads, area, bary = _geometry(p)
    aval = np.asarray(a(bary[:, 0], bary[:, 1]), dtype=float)
    if np.any(~(aval > 0)):
        k = int(np.flatnonzero(~(aval > 0))[0])
        raise CoefficientError(f"diffusion coefficient {aval[k]!r} <= 0 at barycenter {tuple(bary[k])}")
    k = np.einsum("tid,tjd->tij", grads, grads) * (aval * area)[:, None, None]
    # exact zero row sums: the diagonal is minus the off-diagonal sum
    idx = np.arange(3)
    k[:, idx, idx] = 0.0
    k[:, idx, idx] = -k.sum(axis=2)
    return k


def _convection_batch(p, b):
    grads, area, bary = _geometry(p)
    bval = np.asarray(b(bary[:, 0], bary[:, 1]), dtype=float).reshape(-1, 2)
    rows = -(area / 3.0)[:, None] * np.einsum("td,tid->ti", bval, grads)
    return np.repeat(rows[:, :, None], 3, axis=2)


def element_stiffness(vertices, a=1.0) -> np.ndarray:
    """3x3 local stiffness ``a(b_K) |K| grad(phi_j) . grad(phi_i)``."""
    p = np.asarray(vertices, dtype=float).reshape(1, 3, 2)
    return _stiffness_batch(p, as_field(a))[0]


def element_convection(vertices, b) -> np.ndarray:
    """3x3 local convection ``-(|K| / 3) b(b_K) . grad(phi_i)``, same in every column."""
    p = np.asarray(vertices, dtype=float).reshape(1, 3, 2)
    return _convection_batch(p, as_field(b, vector=True))[0]


def element_matrices(mesh: Mesh, a=1.0, b=None):
    """Yield an :class:`ElementMatrix` per triangle, in index order."""
    p = mesh.nodes[mesh.triangles]
    k = _stiffness_batch(p, as_field(a))
    c = _convection_batch(p, as_field(b, vector=True)) if b is not None else np.zeros_like(k)
    for t in range(mesh.n_triangles):
        yield ElementMatrix(t, k[t], c[t], mesh.triangles[t])


def _batched(fn, p, field, workers):
    if not workers or workers <= 1 or len(p) < 2 * workers:
        return fn(p, field)
    chunks = np.array_split(p, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: fn(c, field), chunks))
    return np.concatenate(parts)


def scatter(mesh: Mesh, local) -> sp.csr_matrix:
    """Sum ``(T, 3, 3)`` local matrices into the interior-node system.

    Contributions to an entry are added in triangle order (``bincount``
    accumulates sequentially), so values do not depend on how the local
    matrices were computed.
    """
    dof = mesh.interior_index[mesh.triangles]
    rows = np.repeat(dof[:, :, None], 3, axis=2)
    cols = np.repeat(dof[:, None, :], 3, axis=1)
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.n
    keys = rows[keep] * n + cols[keep]
    uniq, inverse = np.unique(keys, return_inverse=True)
    vals = np.bincount(inverse.ravel(), weights=local[keep], minlength=len(uniq))
    nz = vals != 0
    uniq, vals = uniq[nz], vals[nz]
    r, c = np.divmod(uniq, n)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=n))])
    return sp.csr_matrix((vals, c, indptr), shape=(n, n))


def assemble_diffusion(mesh: Mesh, a=1.0, workers=None) -> sp.csr_matrix:
    """Stiffness matrix over interior nodes.

    Element matrices may be computed on ``workers`` threads; the scatter is
    always sequential in triangle order, so the result does not depend on
    ``workers``.
    """
    p = mesh.nodes[mesh.triangles]
    return scatter(mesh, _batched(_stiffness_batch, p, as_field(a), workers))


def assemble_convection(mesh: Mesh, b, workers=None) -> sp.csr_matrix:
    """Convection matrix with entries ``-int (b . grad phi_i) phi_j``."""
    field = as_field(b, vector=True)
    if field is None:
        return sp.csr_matrix((mesh.n, mesh.n))
    p = mesh.nodes[mesh.triangles]
    return scatter(mesh, _batched(_convection_batch, p, field, workers))


def assemble_system(mesh: Mesh, a=1.0, b=None) -> sp.csr_matrix:
    theta = assemble_diffusion(mesh, a)
    if b is None:
        return theta
    return (theta + assemble_convection(mesh, b)).tocsr()


def nodal_load(mesh: Mesh, f=1.0) -> np.ndarray:
    """Barycentric load ``sum_K (|K| / 3) f(b_K)`` for every node, boundary included."""
    field = as_field(f)
    p = mesh.nodes[mesh.triangles]
    _, area, bary = _geometry(p)
    w = (area / 3.0) * np.asarray(field(bary[:, 0], bary[:, 1]), dtype=float)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.triangles.ravel(), np.repeat(w, 3))
    return out


def assemble_rhs(mesh: Mesh, f=1.0) -> np.ndarray:
    return nodal_load(mesh, f)[mesh.interior_nodes]


def is_symmetric(mat) -> bool:
    """Exact structural and value symmetry."""
    mat = sp.csr_matrix(mat)
    if mat.shape[0] != mat.shape[1]:
        return False
    return (mat != mat.T).nnz == 0
