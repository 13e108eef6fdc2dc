"""Conforming simplicial meshes of the unit square, unit disk, and unit ball.

The curved domains start from a structured grid on ``[-1, 1]^dim`` that is
mapped onto the disk/ball by radial scaling (each L-infinity sphere of the
grid lands on the round sphere of the same radius).  The origin and the grid
rings survive as mesh vertices, all boundary vertices lie exactly on the unit
circle/sphere, and uniform red refinement reproduces the familiar doubling
vertex sequences 25, 81, 289, ... (2D) and 27, 125, 729, ... (3D).

Meshes are immutable after construction; refinement returns a new mesh that
keeps a reference to its parent and a child-to-parent cell map.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import permutations
from typing import Callable, Optional

import numpy as np

from .errors import PointOutsideMesh

#: barycentric slack accepted by point location
LOCATE_TOL = 1e-10

# local edges of the reference triangle / tetrahedron (vertex index pairs)
_EDGES_2D = np.array([[0, 1], [1, 2], [0, 2]])
_EDGES_3D = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])

# octahedron diagonals of the red-refined tetrahedron, as indices into the
# edge midpoints m01 m02 m03 m12 m13 m23, and the vertex ring around each
_OCTA_DIAGONALS = np.array([[0, 5], [1, 4], [2, 3]])
_OCTA_RINGS = np.array(
    [
        [1, 2, 4, 3],  # around (m01, m23): m02 m03 m13 m12
        [0, 2, 5, 3],  # around (m02, m13): m01 m03 m23 m12
        [0, 1, 5, 4],  # around (m03, m12): m01 m02 m23 m13
    ]
)


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh with boundary metadata.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    vertices : ndarray, shape (nv, dim)
        Vertex coordinates.
    cells : ndarray, shape (nc, dim+1)
        Vertex indices per cell, positively oriented.
    boundary_vertex_flags : ndarray of bool, shape (nv,)
        True for vertices on the domain boundary.
    boundary_projector : callable or None
        Maps an (n, dim) array of coordinates to the closest points on the
        true curved boundary; None for polygonal domains.
    parent, cell_parent
        Set by :func:`refine_uniform`: the coarser mesh this one refines,
        and for each cell the index of its parent cell.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_vertex_flags: np.ndarray
    boundary_projector: Optional[Callable[[np.ndarray], np.ndarray]] = None
    parent: Optional["Mesh"] = field(default=None, repr=False)
    cell_parent: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)
        self.boundary_vertex_flags.setflags(write=False)
        if self.cell_parent is not None:
            self.cell_parent.setflags(write=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    @cached_property
    def jacobians(self):
        """Affine maps' Jacobians, shape (nc, dim, dim); column k is v_k+1 - v_0."""
        v = self.vertices[self.cells]
        return np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))

    @cached_property
    def jacobian_dets(self):
        return np.linalg.det(self.jacobians)

    @cached_property
    def inverse_jacobians(self):
        return np.linalg.inv(self.jacobians)

    @cached_property
    def volumes(self):
        """Signed cell volumes (positive for valid meshes)."""
        f = 2.0 if self.dim == 2 else 6.0
        return self.jacobian_dets / f

    @cached_property
    def diameters(self):
        """Per-cell diameter (longest edge)."""
        v = self.vertices[self.cells]
        d = 0.0
        for i in range(self.dim + 1):
            for j in range(i + 1, self.dim + 1):
                e = np.linalg.norm(v[:, i, :] - v[:, j, :], axis=1)
                d = np.maximum(d, e)
        return d

    def barycentric(self, x):
        """Barycentric coordinates of point ``x`` w.r.t. every cell, (nc, dim+1)."""
        x = np.asarray(x, dtype=float)
        v0 = self.vertices[self.cells[:, 0]]
        lam = np.einsum("cij,cj->ci", self.inverse_jacobians, x[None, :] - v0)
        lam0 = 1.0 - lam.sum(axis=1)
        return np.concatenate([lam0[:, None], lam], axis=1)


@dataclass(frozen=True)
class PointLocation:
    """Containing cell and barycentric coordinates of a located point."""

    cell_index: int
    barycentric: tuple


def _radial_scaling(points):
    """Map [-1,1]^d onto the unit disk/ball: L-inf spheres -> round spheres."""
    pts = np.asarray(points, dtype=float)
    rinf = np.max(np.abs(pts), axis=1)
    r2 = np.linalg.norm(pts, axis=1)
    scale = np.divide(rinf, r2, out=np.ones_like(r2), where=r2 > 0)
    return pts * scale[:, None]


def _project_to_sphere(points):
    pts = np.asarray(points, dtype=float)
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def _orient_positive(vertices, cells, dim):
    """Swap the last two vertices of negatively oriented cells."""
    v = vertices[cells]
    jac = np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))
    bad = np.linalg.det(jac) < 0
    if np.any(bad):
        cells = cells.copy()
        cells[bad, dim - 1], cells[bad, dim] = (
            cells[bad, dim].copy(),
            cells[bad, dim - 1].copy(),
        )
    return cells


def build_unit_square(n):
    """Uniform triangulation of (0,1)^2 with ``n`` cells per side.

    Each grid square splits along its lower-left to upper-right diagonal,
    giving 2 n^2 triangles on (n+1)^2 vertices and mesh size sqrt(2)/n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = vid(I, J).ravel()
    v10 = vid(I + 1, J).ravel()
    v11 = vid(I + 1, J + 1).ravel()
    v01 = vid(I, J + 1).ravel()
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.concatenate([lower, upper]).astype(np.int64)
    # interleave so both triangles of a grid square are adjacent in index
    order = np.argsort(np.tile(np.arange(n * n), 2), kind="stable")
    cells = cells[order]

    flags = np.zeros(vertices.shape[0], dtype=bool)
    gi, gj = np.divmod(np.arange(vertices.shape[0]), n + 1)
    flags[(gi == 0) | (gi == n) | (gj == 0) | (gj == n)] = True
    return Mesh(2, vertices, cells, flags)


def _structured_cube_vertices(n, dim):
    xs = np.linspace(-1.0, 1.0, n + 1)
    grids = np.meshgrid(*([xs] * dim), indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def build_unit_disk(level):
    """Triangular mesh of the unit disk, ``level`` uniform refinements deep.

    Level 0 maps a 4x4 grid of squares (25 vertices) onto the disk; each grid
    square splits along the diagonal pointing away from the origin, which
    keeps the mesh symmetric under the dihedral symmetries of the square.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    n = 4
    raw = _structured_cube_vertices(n, 2)
    vertices = _radial_scaling(raw)
    flags = np.max(np.abs(raw), axis=1) >= 1.0 - 1e-14

    def vid(i, j):
        return i * (n + 1) + j

    cells = []
    xs = np.linspace(-1.0, 1.0, n + 1)
    for i in range(n):
        for j in range(n):
            c00, c10 = vid(i, j), vid(i + 1, j)
            c11, c01 = vid(i + 1, j + 1), vid(i, j + 1)
            # corner of the square cell closest to the origin
            near_i = i if abs(xs[i]) <= abs(xs[i + 1]) else i + 1
            near_j = j if abs(xs[j]) <= abs(xs[j + 1]) else j + 1
            if (near_i, near_j) in ((i, j), (i + 1, j + 1)):
                cells.append([c00, c10, c11])
                cells.append([c00, c11, c01])
            else:
                cells.append([c10, c11, c01])
                cells.append([c10, c01, c00])
    cells = _orient_positive(vertices, np.asarray(cells, dtype=np.int64), 2)
    mesh = Mesh(2, vertices, cells, flags, boundary_projector=_project_to_sphere)
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def build_unit_ball(level):
    """Tetrahedral mesh of the unit ball, ``level`` uniform refinements deep.

    Level 0 maps a 2x2x2 grid of cubes (27 vertices) onto the ball; each cube
    is cut into six tetrahedra around its main diagonal.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    n = 2
    raw = _structured_cube_vertices(n, 3)
    vertices = _radial_scaling(raw)
    flags = np.max(np.abs(raw), axis=1) >= 1.0 - 1e-14

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    xs = np.linspace(-1.0, 1.0, n + 1)
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                lo = (i, j, k)
                # per axis, start the Kuhn diagonal at the end nearer the
                # origin so mapped diagonals run radially (and face diagonals
                # stay consistent between neighbouring cubes)
                near = [c if abs(xs[c]) <= abs(xs[c + 1]) else c + 1 for c in lo]
                far = [2 * c + 1 - nr for c, nr in zip(lo, near)]
                for perm in permutations(range(3)):
                    cur = list(near)
                    path = [tuple(cur)]
                    for axis in perm:
                        cur[axis] = far[axis]
                        path.append(tuple(cur))
                    cells.append([vid(*p) for p in path])
    cells = _orient_positive(vertices, np.asarray(cells, dtype=np.int64), 3)
    mesh = Mesh(3, vertices, cells, flags, boundary_projector=_project_to_sphere)
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def _unique_edges(mesh):
    """All mesh edges (sorted vertex pairs) and the per-cell local edge map."""
    local = _EDGES_2D if mesh.dim == 2 else _EDGES_3D
    pairs = mesh.cells[:, local]  # (nc, ne, 2)
    pairs = np.sort(pairs, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(mesh.num_cells, local.shape[0])


def boundary_faces(mesh):
    """Faces (edges in 2D, triangles in 3D) incident to exactly one cell."""
    d = mesh.dim
    locals_ = (
        np.array([[0, 1], [1, 2], [0, 2]])
        if d == 2
        else np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    )
    faces = np.sort(mesh.cells[:, locals_], axis=2).reshape(-1, d)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise ValueError("mesh is not conforming: a face is shared by >2 cells")
    return uniq[counts == 1]


def refine_uniform(mesh):
    """Red (regular) refinement: each triangle -> 4, each tetrahedron -> 8.

    New vertices sit at edge midpoints; midpoints of boundary edges are
    projected onto the true boundary when the mesh carries a projector.
    Existing vertices never move, so straight interior cells are exact
    unions of their children.
    """
    edges, cell_edges = _unique_edges(mesh)
    nv = mesh.num_vertices
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])

    # an edge lies on the boundary iff it is (contained in) a boundary face
    bfaces = boundary_faces(mesh)
    if mesh.dim == 2:
        bedges = bfaces
    else:
        sub = np.concatenate([bfaces[:, [0, 1]], bfaces[:, [0, 2]], bfaces[:, [1, 2]]])
        bedges = np.unique(sub, axis=0)
    keys = edges[:, 0] * nv + edges[:, 1]
    bkeys = bedges[:, 0] * nv + bedges[:, 1]
    edge_on_boundary = np.zeros(edges.shape[0], dtype=bool)
    edge_on_boundary[np.searchsorted(keys, bkeys)] = True

    if mesh.boundary_projector is not None and np.any(edge_on_boundary):
        mids[edge_on_boundary] = mesh.boundary_projector(mids[edge_on_boundary])

    vertices = np.concatenate([mesh.vertices, mids])
    flags = np.concatenate([mesh.boundary_vertex_flags, edge_on_boundary])
    m = nv + cell_edges  # global midpoint vertex index per (cell, local edge)
    c = mesh.cells

    if mesh.dim == 2:
        m01, m12, m02 = m[:, 0], m[:, 1], m[:, 2]
        children = np.stack(
            [
                np.column_stack([c[:, 0], m01, m02]),
                np.column_stack([c[:, 1], m12, m01]),
                np.column_stack([c[:, 2], m02, m12]),
                np.column_stack([m01, m12, m02]),
            ],
            axis=1,
        ).reshape(-1, 3)
        per_parent = 4
    else:
        corner = np.stack(
            [
                np.column_stack([c[:, 0], m[:, 0], m[:, 1], m[:, 2]]),
                np.column_stack([c[:, 1], m[:, 0], m[:, 3], m[:, 4]]),
                np.column_stack([c[:, 2], m[:, 1], m[:, 3], m[:, 5]]),
                np.column_stack([c[:, 3], m[:, 2], m[:, 4], m[:, 5]]),
            ],
            axis=1,
        )
        # split the inner octahedron along its shortest diagonal
        dlen = np.stack(
            [
                np.linalg.norm(
                    vertices[m[:, a]] - vertices[m[:, b]], axis=1
                )
                for a, b in _OCTA_DIAGONALS
            ],
            axis=1,
        )
        choice = np.argmin(dlen, axis=1)
        diag = _OCTA_DIAGONALS[choice]
        ring = _OCTA_RINGS[choice]
        rows = np.arange(mesh.num_cells)
        d1 = m[rows, diag[:, 0]]
        d2 = m[rows, diag[:, 1]]
        octa = np.stack(
            [
                np.column_stack(
                    [d1, d2, m[rows, ring[:, i]], m[rows, ring[:, (i + 1) % 4]]]
                )
                for i in range(4)
            ],
            axis=1,
        )
        children = np.concatenate([corner, octa], axis=1).reshape(-1, 4)
        per_parent = 8

    children = _orient_positive(vertices, children, mesh.dim)
    cell_parent = np.repeat(np.arange(mesh.num_cells), per_parent)
    return Mesh(
        mesh.dim,
        vertices,
        children,
        flags,
        boundary_projector=mesh.boundary_projector,
        parent=mesh,
        cell_parent=cell_parent,
    )


def mesh_size(mesh):
    """Maximum cell diameter h."""
    return float(mesh.diameters.max())


def shape_regularity(mesh):
    """Max over cells of diameter / inradius."""
    v = mesh.vertices[mesh.cells]
    if mesh.dim == 2:
        a = np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        b = np.linalg.norm(v[:, 2] - v[:, 1], axis=1)
        cl = np.linalg.norm(v[:, 2] - v[:, 0], axis=1)
        rho = 2.0 * mesh.volumes / (a + b + cl)
    else:
        # inradius = 3 V / (total face area)
        areas = 0.0
        faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]
        for f in faces:
            e1 = v[:, f[1]] - v[:, f[0]]
            e2 = v[:, f[2]] - v[:, f[0]]
            areas = areas + 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        rho = 3.0 * mesh.volumes / areas
    return float((mesh.diameters / rho).max())


def is_conforming(mesh):
    """Face-hash audit: every face is shared by at most two cells and the
    boundary faces close up around the flagged boundary vertices."""
    try:
        bf = boundary_faces(mesh)
    except ValueError:
        return False
    on_boundary = np.zeros(mesh.num_vertices, dtype=bool)
    on_boundary[np.unique(bf)] = True
    return bool(np.array_equal(on_boundary, mesh.boundary_vertex_flags))


def locate_point(mesh, x, tol=LOCATE_TOL):
    """Find the cell containing ``x`` and its barycentric coordinates.

    Ties on shared faces/edges/vertices resolve to the lowest cell index.
    Raises :class:`PointOutsideMesh` when no cell contains ``x`` within
    ``tol`` in barycentric coordinates.
    """
    lam = mesh.barycentric(x)
    inside = np.nonzero(lam.min(axis=1) >= -tol)[0]
    if inside.size == 0:
        raise PointOutsideMesh(f"point {tuple(np.asarray(x, float))} is outside the mesh")
    cell = int(inside[0])
    bary = np.clip(lam[cell], 0.0, None)
    bary /= bary.sum()
    return PointLocation(cell, tuple(bary))


def write_vtk(mesh, path, point_data=None, comment="pointctl mesh"):
    """Dump the mesh (plus optional per-vertex scalars) as legacy ASCII VTK."""
    from .fileio import write_legacy_vtk

    write_legacy_vtk(mesh, path, point_data=point_data, comment=comment)
