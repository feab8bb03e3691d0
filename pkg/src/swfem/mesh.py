"""Doubly-periodic triangular meshes of the unit square.

Vertices store one representative in [0,1)^2; each cell additionally keeps
"unwrapped" coordinates of its three corners, obtained by shifting the
stored representatives by integers so the triangle is geometrically
contiguous.  Edges carry a global orientation (from lower to higher vertex
index); the global edge normal is the 90-degree clockwise rotation of that
direction.  A cell's edge sign is +1 when its outward normal agrees with
the global normal, which happens exactly when the counterclockwise boundary
walk of the cell crosses the edge from lower to higher vertex index.

Because the domain is a torus, two vertices may be joined by more than one
edge (short meshes wrap around).  Edges are therefore keyed by the vertex
pair plus the integer wrap offset of the geometric segment.
"""

from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh construction or file input."""


# Local edges of the reference triangle, opposite the like-numbered vertex,
# each listed from the lower to the higher local vertex index.
LOCAL_EDGES = ((1, 2), (0, 2), (0, 1))

# The counterclockwise boundary walk v0 -> v1 -> v2 -> v0 traverses local
# edge 0 as 1->2, edge 1 as 2->0 and edge 2 as 0->1.
_CCW_WALK = ((1, 2), (2, 0), (0, 1))


@dataclass
class Mesh:
    """Periodic triangulation of [0,1]^2.

    Arrays
    ------
    vertices : (V, 2) periodic representatives in [0,1)^2
    cells : (F, 3) vertex indices, counterclockwise
    edges : (E, 2) vertex indices, low before high
    cell_edges : (F, 3) incident edge index per local edge
    cell_edge_signs : (F, 3) +-1, outward normal vs. global edge normal
    cell_edge_aligned : (F, 3) True when the local edge direction
        (low to high *local* vertex) runs from low to high *global* index
    edge_cells : (E, 2) the two incident cells, sign +1 cell first
    cell_coords : (F, 3, 2) unwrapped corner coordinates
    jac, jac_inv : (F, 2, 2) affine map from the reference triangle
    det_jac : (F,) twice the cell area, positive
    """

    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    cell_edge_aligned: np.ndarray
    edge_cells: np.ndarray
    cell_coords: np.ndarray
    jac: np.ndarray = field(repr=False, default=None)
    jac_inv: np.ndarray = field(repr=False, default=None)
    det_jac: np.ndarray = field(repr=False, default=None)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def areas(self):
        return 0.5 * self.det_jac

    def edge_length(self, e):
        lo, hi = self.edges[e]
        c = self.edge_cells[e, 0]
        tri = self.cells[c]
        pts = {tri[k]: self.cell_coords[c, k] for k in range(3)}
        return float(np.linalg.norm(pts[hi] - pts[lo]))


def _wrap_unit(x):
    y = np.mod(x, 1.0)
    # mod can return 1.0 for inputs within rounding of an integer
    y[y >= 1.0] = 0.0
    return y


def _build_mesh(vertices, cells, cell_coords=None):
    """Assemble topology and geometry from periodic vertices and cells.

    When `cell_coords` is given (mesh read from a file with duplicated
    seam nodes) the unwrapped per-cell corner coordinates are taken as
    is; otherwise corners 1, 2 are placed at the integer-shift
    representative nearest corner 0, which requires cells smaller than
    half the period.
    """
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must be an (V, 2) array")
    if cells.ndim != 2 or cells.shape[1] != 3:
        raise MeshError("cells must be an (F, 3) array")
    if np.any(cells < 0) or np.any(cells >= len(vertices)):
        raise MeshError("cell references a vertex out of range")
    if np.any((cells[:, [0, 0, 1]] == cells[:, [1, 2, 2]])):
        raise MeshError("cell with repeated vertex (degenerate after "
                        "periodic identification)")

    if cell_coords is not None:
        coords = np.array(cell_coords, dtype=float)
    else:
        p0 = vertices[cells[:, 0]]
        coords = np.empty((len(cells), 3, 2))
        coords[:, 0] = p0
        for k in (1, 2):
            d = vertices[cells[:, k]] - p0
            d -= np.round(d)
            if np.any(np.abs(d) > 0.5 - 1e-12):
                raise MeshError("cell spans half the periodic domain; "
                                "mesh too coarse for periodic wrap")
            coords[:, k] = p0 + d

    # Enforce counterclockwise orientation.
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = cross < 0
    if np.any(flip):
        cells = cells.copy()
        cells[flip, 1], cells[flip, 2] = cells[flip, 2], cells[flip, 1].copy()
        coords[flip, 1], coords[flip, 2] = (coords[flip, 2],
                                            coords[flip, 1].copy())
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(cross <= 1e-14):
        raise MeshError("degenerate cell with non-positive area")

    # Edge identification: vertex pair plus integer wrap offset of the
    # geometric segment (lets distinct periodic copies coexist).
    edge_index = {}
    edge_list = []
    ncells = len(cells)
    cell_edges = np.empty((ncells, 3), dtype=np.int64)
    cell_edge_signs = np.empty((ncells, 3), dtype=np.int64)
    cell_edge_aligned = np.empty((ncells, 3), dtype=bool)
    edge_cells_tmp = []

    for c in range(ncells):
        tri = cells[c]
        for le, (a, b) in enumerate(LOCAL_EDGES):
            ga, gb = int(tri[a]), int(tri[b])
            lo, hi = (ga, gb) if ga < gb else (gb, ga)
            plo = coords[c, a] if tri[a] == lo else coords[c, b]
            phi = coords[c, a] if tri[a] == hi else coords[c, b]
            offset = np.round((phi - plo) - (vertices[hi] - vertices[lo]))
            key = (lo, hi, int(offset[0]), int(offset[1]))
            e = edge_index.get(key)
            if e is None:
                e = len(edge_list)
                edge_index[key] = e
                edge_list.append((lo, hi))
                edge_cells_tmp.append([])
            cell_edges[c, le] = e
            wa, wb = _CCW_WALK[le]
            sign = 1 if tri[wa] < tri[wb] else -1
            cell_edge_signs[c, le] = sign
            cell_edge_aligned[c, le] = ga < gb
            edge_cells_tmp[e].append((c, sign))

    edges = np.array(edge_list, dtype=np.int64)
    edge_cells = np.empty((len(edges), 2), dtype=np.int64)
    for e, inc in enumerate(edge_cells_tmp):
        if len(inc) != 2:
            raise MeshError(f"edge {edges[e]} shared by {len(inc)} cells; "
                            "periodic mesh must be boundary-free")
        (c1, s1), (c2, s2) = inc
        if s1 + s2 != 0:
            raise MeshError(f"inconsistent orientation on edge {edges[e]}")
        edge_cells[e] = (c1, c2) if s1 == 1 else (c2, c1)

    jac = np.stack([e1, e2], axis=-1)  # columns are the two edge vectors
    det = cross
    jac_inv = np.empty_like(jac)
    jac_inv[:, 0, 0] = jac[:, 1, 1] / det
    jac_inv[:, 0, 1] = -jac[:, 0, 1] / det
    jac_inv[:, 1, 0] = -jac[:, 1, 0] / det
    jac_inv[:, 1, 1] = jac[:, 0, 0] / det

    return Mesh(vertices=vertices, cells=cells, edges=edges,
                cell_edges=cell_edges, cell_edge_signs=cell_edge_signs,
                cell_edge_aligned=cell_edge_aligned, edge_cells=edge_cells,
                cell_coords=coords, jac=jac, jac_inv=jac_inv, det_jac=det)


def structured_mesh(n):
    """Uniform periodic mesh: n x n squares, each split along the
    lower-left to upper-right diagonal.

    Yields n^2 vertices, 3 n^2 edges and 2 n^2 cells with spacing 1/n.
    Requires n >= 3 so that no two periodic entities coincide.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise MeshError(f"structured mesh size must be an integer, got {n!r}")
    if n < 3:
        raise MeshError(f"structured mesh requires n >= 3, got {n}; smaller "
                        "meshes create duplicate periodic edges")
    n = int(n)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    vertices = np.column_stack([ii.ravel(order="F") / n,
                                jj.ravel(order="F") / n])

    def vid(i, j):
        return (j % n) * n + (i % n)

    cells = []
    for j in range(n):
        for i in range(n):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    return _build_mesh(vertices, cells)


def validate(mesh, tol=1e-12):
    """Check the mesh invariants; raises MeshError on violation."""
    if np.any(mesh.det_jac <= 0):
        raise MeshError("cell with non-positive area")
    if abs(mesh.areas.sum() - 1.0) > tol:
        raise MeshError(f"cell areas sum to {mesh.areas.sum()!r}, not 1")
    chi = mesh.num_vertices - mesh.num_edges + mesh.num_cells
    if chi != 0:
        raise MeshError(f"Euler characteristic {chi} != 0 (not a torus)")
    # Each edge is crossed once in each direction by its two cells.
    acc = np.zeros(mesh.num_edges, dtype=np.int64)
    np.add.at(acc, mesh.cell_edges.ravel(), mesh.cell_edge_signs.ravel())
    if np.any(acc != 0):
        raise MeshError("signed edge incidence does not cancel")
    counts = np.zeros(mesh.num_edges, dtype=np.int64)
    np.add.at(counts, mesh.cell_edges.ravel(), 1)
    if np.any(counts != 2):
        raise MeshError("edge not shared by exactly two cells")
    # Unwrapped corners differ from the stored representatives by
    # integers (up to the periodic matching tolerance of file input).
    rep = mesh.vertices[mesh.cells]
    shift = mesh.cell_coords - rep
    if np.max(np.abs(shift - np.round(shift))) > 2e-8:
        raise MeshError("cell coordinates are not integer shifts of the "
                        "stored vertex representatives")
    return True


# ---------------------------------------------------------------------------
# MSH (gmsh ASCII v2.2) input and output
# ---------------------------------------------------------------------------

_TOL_PERIODIC = 1e-8


def _parse_msh_sections(text, path):
    sections = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            end = f"$End{name}"
            j = i + 1
            while j < len(lines) and lines[j].strip() != end:
                j += 1
            if j == len(lines):
                raise MeshError(f"{path}: unterminated section ${name}")
            sections[name] = lines[i + 1:j]
            i = j + 1
        else:
            i += 1
    return sections


def read_msh(path):
    """Read a gmsh ASCII v2.2 triangle mesh of [0,1]^2 and identify the
    boundary periodically (x=1 with x=0, y=1 with y=0).

    Points and lines in the file are skipped; any other element type is
    rejected.  Boundary nodes must match their periodic partner to within
    1e-8 in the off-axis coordinate.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}") from exc

    sections = _parse_msh_sections(text, path)
    for required in ("MeshFormat", "Nodes", "Elements"):
        if required not in sections:
            raise MeshError(f"{path}: missing ${required} section")
    fmt = sections["MeshFormat"][0].split()
    if not fmt or not fmt[0].startswith("2."):
        raise MeshError(f"{path}: unsupported MSH format version "
                        f"{fmt[0] if fmt else '<empty>'}; expected ASCII 2.2")
    if len(fmt) > 1 and fmt[1] != "0":
        raise MeshError(f"{path}: binary MSH files are not supported")

    try:
        node_lines = sections["Nodes"]
        n_nodes = int(node_lines[0])
        ids = np.empty(n_nodes, dtype=np.int64)
        xyz = np.empty((n_nodes, 2))
        for k in range(n_nodes):
            parts = node_lines[1 + k].split()
            ids[k] = int(parts[0])
            xyz[k] = float(parts[1]), float(parts[2])
    except (IndexError, ValueError) as exc:
        raise MeshError(f"{path}: unparseable $Nodes section: {exc}") from exc
    id_map = {int(i): k for k, i in enumerate(ids)}

    tol = _TOL_PERIODIC
    if xyz.min() < -tol or xyz.max() > 1.0 + tol:
        raise MeshError(f"{path}: node coordinates outside [0,1]^2")

    tris = []
    try:
        elem_lines = sections["Elements"]
        n_elem = int(elem_lines[0])
        for k in range(n_elem):
            parts = elem_lines[1 + k].split()
            etype = int(parts[1])
            ntags = int(parts[2])
            conn = parts[3 + ntags:]
            if etype == 2:
                if len(conn) != 3:
                    raise MeshError(f"{path}: malformed triangle element")
                tris.append([id_map[int(c)] for c in conn])
            elif etype in (1, 8, 15, 26, 27, 28):
                continue  # points and line segments carry no 2D content
            else:
                raise MeshError(f"{path}: non-triangle element of type "
                                f"{etype} (only 3-node triangles supported)")
    except MeshError:
        raise
    except (IndexError, ValueError, KeyError) as exc:
        raise MeshError(f"{path}: unparseable $Elements section: "
                        f"{exc}") from exc
    if not tris:
        raise MeshError(f"{path}: no triangle elements found")
    tris = np.asarray(tris, dtype=np.int64)

    # Union-find over periodic partners.
    parent = np.arange(len(xyz))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for axis in (0, 1):
        other = 1 - axis
        high = np.where(np.abs(xyz[:, axis] - 1.0) <= tol)[0]
        low = np.where(np.abs(xyz[:, axis]) <= tol)[0]
        for node in high:
            match = low[np.abs(xyz[low, other] - xyz[node, other]) <= tol]
            if len(match) == 0:
                raise MeshError(
                    f"{path}: unmatched boundary vertex at "
                    f"{tuple(xyz[node])}: no periodic partner within "
                    f"{tol:g}")
            union(node, match[0])
        for node in low:
            if not np.any(np.abs(xyz[high, other] - xyz[node, other]) <= tol):
                raise MeshError(
                    f"{path}: unmatched boundary vertex at "
                    f"{tuple(xyz[node])}: no periodic partner within "
                    f"{tol:g}")

    roots = np.array([find(k) for k in range(len(xyz))])
    unique_roots, new_index = np.unique(roots, return_inverse=True)
    vertices = _wrap_unit(xyz[unique_roots].copy())
    cells = new_index[tris]
    # keep the file's duplicated-seam coordinates as the unwrapped cell
    # geometry; identification only renames vertices
    return _build_mesh(vertices, cells, cell_coords=xyz[tris])


def write_msh(mesh, path):
    """Write a Mesh as a gmsh ASCII v2.2 file covering [0,1]^2.

    Periodically identified vertices are duplicated along the seams, one
    node per (vertex, integer shift) pair, so that read_msh round-trips
    the mesh.  Only meshes whose unwrapped cells fit in the closed unit
    square (structured meshes do) can be written.
    """
    nodes = {}
    coords = []
    conn = np.empty((mesh.num_cells, 3), dtype=np.int64)
    for c in range(mesh.num_cells):
        for k in range(3):
            v = int(mesh.cells[c, k])
            p = mesh.cell_coords[c, k]
            shift = np.round(p - mesh.vertices[v]).astype(int)
            if p.min() < -1e-12 or p.max() > 1.0 + 1e-12:
                raise MeshError("cell corners leave [0,1]^2 when unwrapped; "
                                "mesh cannot be written as a unit-square "
                                "MSH file")
            key = (v, int(shift[0]), int(shift[1]))
            idx = nodes.get(key)
            if idx is None:
                idx = len(coords)
                nodes[key] = idx
                coords.append(np.clip(p, 0.0, 1.0))
            conn[c, k] = idx

    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{len(coords)}\n")
        for k, p in enumerate(coords):
            fh.write(f"{k + 1} {p[0]:.17g} {p[1]:.17g} 0\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n{len(conn)}\n")
        for c, tri in enumerate(conn):
            fh.write(f"{c + 1} 2 2 0 1 {tri[0] + 1} {tri[1] + 1} "
                     f"{tri[2] + 1}\n")
        fh.write("$EndElements\n")
