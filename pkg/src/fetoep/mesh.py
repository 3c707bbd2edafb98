"""
Triangular meshes: structured hexagon and Friedrichs-Keller families,
midpoint refinement, Triangle file I/O and seeded perturbation.

Node coordinates are stored as an ``(N, 2)`` float array and triangles as
an ``(T, 3)`` integer array of node indices in counter-clockwise order.
Only interior nodes carry unknowns; ``interior_index[k]`` is the row of
node ``k`` in the linear system, or ``-1`` on the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, MeshFormatError

SQRT3 = np.sqrt(3.0)

# Regular hexagon of unit diameter inscribed in [0, 1] x [0, sqrt(3)/2],
# with one vertex at (1, sqrt(3)/4) on the horizontal axis through its center.
HEX_SIDE = 0.5
HEX_CENTER = (0.5, SQRT3 / 4.0)

CANONICAL_VERSION = 1


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming triangulation of a polygonal domain.

    Parameters
    ----------
    nodes : (N, 2) array_like
        Node coordinates.
    triangles : (T, 3) array_like of int
        Vertex indices, counter-clockwise.
    is_boundary : (N,) array_like of bool
        Dirichlet flag per node.
    family : str
        One of ``"hex"``, ``"square-fk"``, ``"unstructured"``, ``"perturbed"``.
    m : int, optional
        Segments per boundary side for the structured families.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    is_boundary: np.ndarray
    family: str = "unstructured"
    m: Optional[int] = None
    interior_index: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        bnd = np.asarray(self.is_boundary, dtype=bool).reshape(-1)
        if bnd.shape[0] != nodes.shape[0]:
            raise InvalidParameterError("is_boundary length does not match node count")
        if tris.size and (tris.min() < 0 or tris.max() >= nodes.shape[0]):
            raise InvalidParameterError("triangle references a missing node")
        index = np.full(nodes.shape[0], -1, dtype=np.int64)
        index[~bnd] = np.arange(int((~bnd).sum()))
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "triangles", _readonly(tris))
        object.__setattr__(self, "is_boundary", _readonly(bnd))
        object.__setattr__(self, "interior_index", _readonly(index))
        object.__setattr__(self, "h", float(edge_lengths(nodes, tris).max()) if len(tris) else 0.0)

    @property
    def n(self) -> int:
        """Number of interior nodes, i.e. the order of the linear system."""
        return int((~self.is_boundary).sum())

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    def signed_areas(self) -> np.ndarray:
        return signed_areas(self.nodes, self.triangles)

    def edges(self):
        """Unique undirected edges and the number of triangles sharing each."""
        return unique_edges(self.triangles)

    def __repr__(self):
        tag = self.family if self.m is None else f"{self.family}({self.m})"
        return f"Mesh<{tag}: {self.n_nodes} nodes, {self.n_triangles} triangles, n={self.n}, h={self.h:.4g}>"


def signed_areas(nodes, triangles):
    p = nodes[triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def edge_lengths(nodes, triangles):
    """Longest-edge length (triangle diameter) per triangle."""
    p = nodes[triangles]
    d = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
    return np.sqrt((d ** 2).sum(-1)).max(axis=1)


def unique_edges(triangles):
    """Return ``(edges, counts, inverse)`` for the undirected edges.

    ``inverse`` has shape ``(T, 3)``; entry ``[t, i]`` is the edge opposite
    local vertex ``i`` of triangle ``t``.
    """
    t = np.asarray(triangles)
    local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
    local = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(local, axis=0, return_inverse=True, return_counts=True)
    return edges, counts, inverse.reshape(-1, 3)


def boundary_from_topology(n_nodes, triangles):
    """Flag nodes lying on an edge that belongs to exactly one triangle."""
    edges, counts, _ = unique_edges(triangles)
    flag = np.zeros(n_nodes, dtype=bool)
    flag[edges[counts == 1].ravel()] = True
    return flag


def check_mesh(mesh: Mesh) -> None:
    """Raise ``InvalidParameterError`` if a structural invariant fails."""
    area = mesh.signed_areas()
    if np.any(area <= 0):
        raise InvalidParameterError(f"{int((area <= 0).sum())} triangles are not counter-clockwise")
    edges, counts, _ = mesh.edges()
    if np.any(counts > 2):
        raise InvalidParameterError("an edge is shared by more than two triangles")
    on_boundary_edge = np.zeros(mesh.n_nodes, dtype=bool)
    on_boundary_edge[edges[counts == 1].ravel()] = True
    if np.any(on_boundary_edge & ~mesh.is_boundary):
        raise InvalidParameterError("a node on a boundary edge is flagged interior")
    used = np.zeros(mesh.n_nodes, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise InvalidParameterError("mesh has nodes not referenced by any triangle")


# ---------------------------------------------------------------------------
# Structured families
# ---------------------------------------------------------------------------

def hex_axial_sites(m):
    """Axial lattice coordinates ``(i, j)`` of the hexagon of radius ``m``.

    Sites satisfy ``max(|i|, |j|, |i + j|) <= m`` and are ordered by ``j``
    then ``i``.
    """
    sites = [(i, j) for j in range(-m, m + 1) for i in range(-m, m + 1) if abs(i + j) <= m]
    return np.array(sites, dtype=np.int64)


def generate_hex_structured(m: int, side: float = HEX_SIDE, center=HEX_CENTER) -> Mesh:
    """Regular hexagon split into ``6 m**2`` congruent equilateral triangles.

    The site with axial coordinates ``(i, j)`` sits at
    ``center + (side / m) * (i + j / 2, j * sqrt(3) / 2)``.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidParameterError(f"hexagon subdivision m must be a positive integer, got {m!r}")
    m = int(m)
    sites = hex_axial_sites(m)
    i, j = sites[:, 0], sites[:, 1]
    h = side / m
    nodes = np.column_stack([center[0] + h * (i + 0.5 * j), center[1] + h * (SQRT3 / 2.0) * j])
    boundary = np.maximum(np.maximum(np.abs(i), np.abs(j)), np.abs(i + j)) == m

    lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(sites)}
    # each lattice rhombus (a,b)+[0,1]^2 holds one "up" and one "down" triangle;
    # the anchor (a,b) itself may lie outside the hexagon
    tris = []
    for b in range(-m - 1, m + 1):
        for a in range(-m - 1, m + 1):
            here, right = lookup.get((a, b)), lookup.get((a + 1, b))
            up, diag = lookup.get((a, b + 1)), lookup.get((a + 1, b + 1))
            if here is not None and right is not None and up is not None:
                tris.append((here, right, up))
            if right is not None and diag is not None and up is not None:
                tris.append((right, diag, up))
    return Mesh(nodes, np.array(tris), boundary, family="hex", m=m)


def generate_square_fk(m: int) -> Mesh:
    """Unit square, ``m x m`` cells each cut along the lower-left to
    upper-right diagonal."""
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise InvalidParameterError(f"square subdivision m must be an integer >= 2, got {m!r}")
    m = int(m)
    j, i = np.divmod(np.arange((m + 1) ** 2), m + 1)
    nodes = np.column_stack([i / m, j / m])
    boundary = (i == 0) | (i == m) | (j == 0) | (j == m)
    cj, ci = np.divmod(np.arange(m * m), m)
    ll = cj * (m + 1) + ci
    lr, ur, ul = ll + 1, ll + m + 2, ll + m + 1
    tris = np.empty((2 * m * m, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([ll, lr, ur])
    tris[1::2] = np.column_stack([ll, ur, ul])
    return Mesh(nodes, tris, boundary, family="square-fk", m=m)


# ---------------------------------------------------------------------------
# Refinement and perturbation
# ---------------------------------------------------------------------------

def refine_midpoint(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    Parent nodes keep their indices; midpoint nodes follow in the sorted
    order of their edges. A midpoint is a boundary node iff its edge is a
    boundary edge.
    """
    edges, counts, inverse = mesh.edges()
    n0 = mesh.n_nodes
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])
    boundary = np.concatenate([mesh.is_boundary, counts == 1])

    t = mesh.triangles
    # inverse[:, i] is the edge opposite vertex i
    m12, m20, m01 = (n0 + inverse[:, 0]), (n0 + inverse[:, 1]), (n0 + inverse[:, 2])
    children = np.stack(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([m01, t[:, 1], m12]),
            np.column_stack([m20, m12, t[:, 2]]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    m = 2 * mesh.m if mesh.family in ("hex", "square-fk") and mesh.m is not None else mesh.m
    return Mesh(nodes, children, boundary, family=mesh.family, m=m)


def perturb(mesh: Mesh, alpha: float, seed: int) -> Mesh:
    """Displace interior nodes uniformly on a disk of radius ``alpha * h``.

    Displacements come from a Philox generator keyed by ``seed``. Nodes of
    any triangle that loses positive orientation get their displacement
    halved until every triangle is valid again.
    """
    if not 0.0 <= alpha < 0.5:
        raise InvalidParameterError(f"alpha must lie in [0, 0.5), got {alpha}")
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random((mesh.n_nodes, 2))
    radius = alpha * mesh.h * np.sqrt(u[:, 0])
    angle = 2.0 * np.pi * u[:, 1]
    disp = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    disp[mesh.is_boundary] = 0.0

    for _ in range(64):
        nodes = mesh.nodes + disp
        bad = signed_areas(nodes, mesh.triangles) <= 0
        if not bad.any():
            break
        disp[np.unique(mesh.triangles[bad])] *= 0.5
    else:
        nodes = mesh.nodes.copy()
    return Mesh(nodes, mesh.triangles, mesh.is_boundary, family="perturbed", m=mesh.m)


# ---------------------------------------------------------------------------
# Triangle .node / .ele format
# ---------------------------------------------------------------------------

def _data_lines(text):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line.split()


def _ints(tokens, number, source):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MeshFormatError(f"expected integers, got {' '.join(tokens)!r}", number, source) from None


def parse_node(text):
    """Parse a ``.node`` file into ``(coords, markers_or_None, first_index)``."""
    lines = _data_lines(text)
    try:
        number, header = next(lines)
    except StopIteration:
        raise MeshFormatError("empty file", None, ".node") from None
    if len(header) < 4:
        raise MeshFormatError("header needs <count> <dim> <attrs> <markers>", number, ".node")
    count, dim, nattr, nmark = _ints(header[:4], number, ".node")
    if dim != 2:
        raise MeshFormatError(f"dimension must be 2, got {dim}", number, ".node")
    if nmark not in (0, 1) or count < 0 or nattr < 0:
        raise MeshFormatError("invalid header values", number, ".node")
    width = 3 + nattr + nmark
    coords = np.empty((count, 2))
    markers = np.zeros(count, dtype=np.int64) if nmark else None
    first = None
    for k in range(count):
        try:
            number, row = next(lines)
        except StopIteration:
            raise MeshFormatError(f"expected {count} vertices, found {k}", None, ".node") from None
        if len(row) < width:
            raise MeshFormatError(f"expected {width} columns, got {len(row)}", number, ".node")
        (index,) = _ints(row[:1], number, ".node")
        if first is None:
            if index not in (0, 1):
                raise MeshFormatError(f"first vertex index must be 0 or 1, got {index}", number, ".node")
            first = index
        if index != first + k:
            raise MeshFormatError(f"vertex index {index} out of sequence", number, ".node")
        try:
            coords[k] = float(row[1]), float(row[2])
        except ValueError:
            raise MeshFormatError("bad coordinate", number, ".node") from None
        if nmark:
            markers[k] = _ints(row[3 + nattr : 4 + nattr], number, ".node")[0]
    return coords, markers, (0 if first is None else first)


def parse_ele(text, n_nodes, first_index):
    lines = _data_lines(text)
    try:
        number, header = next(lines)
    except StopIteration:
        raise MeshFormatError("empty file", None, ".ele") from None
    if len(header) < 3:
        raise MeshFormatError("header needs <count> <nodes-per-triangle> <attrs>", number, ".ele")
    count, per, nattr = _ints(header[:3], number, ".ele")
    if per != 3:
        raise MeshFormatError(f"only 3 nodes per triangle are supported, got {per}", number, ".ele")
    tris = np.empty((count, 3), dtype=np.int64)
    for k in range(count):
        try:
            number, row = next(lines)
        except StopIteration:
            raise MeshFormatError(f"expected {count} triangles, found {k}", None, ".ele") from None
        if len(row) < 4 + nattr:
            raise MeshFormatError(f"expected {4 + nattr} columns, got {len(row)}", number, ".ele")
        verts = np.array(_ints(row[1:4], number, ".ele")) - first_index
        if verts.min() < 0 or verts.max() >= n_nodes:
            bad = int(verts[(verts < 0) | (verts >= n_nodes)][0]) + first_index
            raise MeshFormatError(f"node index {bad} out of range", number, ".ele")
        tris[k] = verts
    return tris


def import_triangle(node_text: str, ele_text: str) -> Mesh:
    """Build a mesh from the text of a Triangle ``.node`` and ``.ele`` pair.

    Boundary flags come from the vertex markers when the file has them,
    otherwise from edge multiplicity. Clockwise triangles are reoriented.
    """
    coords, markers, first = parse_node(node_text)
    tris = parse_ele(ele_text, len(coords), first)
    area = signed_areas(coords, tris)
    if np.any(area == 0):
        k = int(np.flatnonzero(area == 0)[0])
        raise MeshFormatError(f"triangle {k + first} has zero area", None, ".ele")
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    used = np.zeros(len(coords), dtype=bool)
    used[tris.ravel()] = True
    if not used.all():
        k = int(np.flatnonzero(~used)[0])
        raise MeshFormatError(f"vertex {k + first} is not used by any triangle", None, ".node")
    if markers is not None:
        boundary = markers != 0
    else:
        boundary = boundary_from_topology(len(coords), tris)
    return Mesh(coords, tris, boundary, family="unstructured")


def export_triangle(mesh: Mesh):
    """Return ``(node_text, ele_text)`` in Triangle format, 1-based."""
    node = [f"{mesh.n_nodes} 2 0 1"]
    for k, ((x, y), b) in enumerate(zip(mesh.nodes.tolist(), mesh.is_boundary.tolist()), start=1):
        node.append(f"{k} {x!r} {y!r} {int(b)}")
    ele = [f"{mesh.n_triangles} 3 0"]
    for k, (a, b, c) in enumerate(mesh.triangles.tolist(), start=1):
        ele.append(f"{k} {a + 1} {b + 1} {c + 1}")
    return "\n".join(node) + "\n", "\n".join(ele) + "\n"


def read_triangle(basename) -> Mesh:
    """Read ``basename.node`` and ``basename.ele``."""
    base = str(basename)
    with open(base + ".node") as fh:
        node_text = fh.read()
    with open(base + ".ele") as fh:
        ele_text = fh.read()
    return import_triangle(node_text, ele_text)


def write_triangle(mesh: Mesh, basename) -> None:
    node_text, ele_text = export_triangle(mesh)
    base = str(basename)
    with open(base + ".node", "w") as fh:
        fh.write(node_text)
    with open(base + ".ele", "w") as fh:
        fh.write(ele_text)


# ---------------------------------------------------------------------------
# Canonical dump (golden files)
# ---------------------------------------------------------------------------

def dump_mesh(mesh: Mesh) -> str:
    out = [f"fetoep-mesh {CANONICAL_VERSION}", f"family {mesh.family} {mesh.m if mesh.m is not None else '-'}"]
    out.append(f"nodes {mesh.n_nodes}")
    out += [f"{x!r} {y!r} {int(b)}" for (x, y), b in zip(mesh.nodes.tolist(), mesh.is_boundary.tolist())]
    out.append(f"triangles {mesh.n_triangles}")
    out += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    return "\n".join(out) + "\n"


def load_mesh(text: str) -> Mesh:
    lines = text.splitlines()
    try:
        tag, version = lines[0].split()
        if tag != "fetoep-mesh" or int(version) != CANONICAL_VERSION:
            raise MeshFormatError("not a canonical mesh dump", 1)
        _, family, m = lines[1].split()
        count = int(lines[2].split()[1])
        rows = [line.split() for line in lines[3 : 3 + count]]
        nodes = np.array([[float(r[0]), float(r[1])] for r in rows]).reshape(-1, 2)
        bnd = np.array([r[2] == "1" for r in rows], dtype=bool)
        tcount = int(lines[3 + count].split()[1])
        tris = np.array([[int(v) for v in line.split()] for line in lines[4 + count : 4 + count + tcount]])
    except (IndexError, ValueError) as exc:
        raise MeshFormatError(f"bad canonical mesh dump ({exc})") from None
    return Mesh(nodes, tris.reshape(-1, 3), bnd, family=family, m=None if m == "-" else int(m))


def canonical_form(mesh: Mesh, decimals=12):
    """Node set and triangle set in an order independent of numbering.

    Returns sorted rounded coordinates and triangles expressed in the
    sorted numbering, each triangle rotated to start at its smallest index
    while keeping the orientation.
    """
    key = np.round(mesh.nodes, decimals)
    order = np.lexsort((key[:, 1], key[:, 0]))
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    tris = rank[mesh.triangles]
    shift = np.argmin(tris, axis=1)
    rolled = np.array([np.roll(t, -s) for t, s in zip(tris, shift)]).reshape(-1, 3)
    rolled = rolled[np.lexsort(rolled.T[::-1])]
    return key[order], mesh.is_boundary[order], rolled
