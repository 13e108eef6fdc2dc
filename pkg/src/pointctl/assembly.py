"""P1 finite element assembly on interior degrees of freedom.

Homogeneous Dirichlet conditions are imposed by eliminating the boundary
vertices: every assembled operator and functional lives on the interior
vertex set, and finite element functions are implicitly zero on the boundary
(and outside the polygonal mesh of a curved domain).

Pointwise fields passed to assembly routines are either plain callables on
(n, dim) coordinate arrays or objects exposing ``values_on_cells`` (finite
element functions and derived quantities), so that cell-local evaluation
never needs point location.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch
from .mesh import locate_point
from .quadrature import ASSEMBLY_DEGREE, gauss_rule, physical_points
from .sparse import SparseMatrix

_CHUNK = 65536


class DofMap:
    """Bijection between interior vertices and degrees of freedom."""

    def __init__(self, mesh):
        self.mesh = mesh
        interior = ~mesh.boundary_vertex_flags
        self.interior_vertices = np.nonzero(interior)[0]
        self.vertex_to_dof = np.full(mesh.num_vertices, -1, dtype=np.int64)
        self.vertex_to_dof[self.interior_vertices] = np.arange(
            self.interior_vertices.shape[0]
        )
        self.vertex_to_dof.setflags(write=False)
        self.interior_vertices.setflags(write=False)

    @property
    def num_dofs(self):
        return self.interior_vertices.shape[0]


@dataclass
class FeFunction:
    """P1 function given by coefficients on the interior vertices."""

    dofmap: DofMap
    coefficients: np.ndarray

    @classmethod
    def zeros(cls, dofmap):
        return cls(dofmap, np.zeros(dofmap.num_dofs))

    def padded(self):
        """Vertex values with zeros on boundary vertices."""
        full = np.zeros(self.dofmap.mesh.num_vertices)
        full[self.dofmap.interior_vertices] = self.coefficients
        return full

    def values_on_cells(self, cells_idx, bary, phys=None):
        """Values at barycentric points ``bary`` (K, dim+1) on given cells."""
        mesh = self.dofmap.mesh
        nodal = self.padded()[mesh.cells[cells_idx]]  # (m, dim+1)
        return nodal @ bary.T  # (m, K)


@dataclass(frozen=True)
class CoefficientField:
    """Elliptic operator data: diffusion matrix a_ij and reaction a_0.

    ``diffusion`` maps (n, dim) coordinates to (n, dim, dim) symmetric
    matrices, ``reaction`` maps them to n nonnegative values.  ``None``
    means identity diffusion / zero reaction (the Laplacian), which takes a
    quadrature-free assembly path.
    """

    diffusion: Optional[Callable] = None
    reaction: Optional[Callable] = None

    @property
    def is_laplacian(self):
        return self.diffusion is None and self.reaction is None


class _CallableField:
    def __init__(self, fn):
        self.fn = fn

    def values_on_cells(self, cells_idx, bary, phys=None):
        n, k = phys.shape[0], phys.shape[1]
        return np.asarray(self.fn(phys.reshape(-1, phys.shape[2])), dtype=float).reshape(n, k)


class FieldSum:
    """Pointwise sum of fields (e.g. control plus forcing)."""

    def __init__(self, *fields):
        self.fields = [f for f in fields if f is not None]

    def values_on_cells(self, cells_idx, bary, phys=None):
        total = 0.0
        for f in self.fields:
            total = total + _as_field(f).values_on_cells(cells_idx, bary, phys)
        return total


def _as_field(obj):
    if hasattr(obj, "values_on_cells"):
        return obj
    if callable(obj):
        return _CallableField(obj)
    raise TypeError(f"cannot evaluate {type(obj).__name__} as a pointwise field")


def p1_gradients(mesh):
    """Constant gradients of the barycentric basis, shape (nc, dim+1, dim).

    lambda_k(x) = [J^{-1} (x - v_0)]_k for k >= 1, so its gradient is the
    k-th row of J^{-1}; lambda_0 takes the remainder.
    """
    grads = np.empty((mesh.num_cells, mesh.dim + 1, mesh.dim))
    grads[:, 1:, :] = mesh.inverse_jacobians
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return grads


def _scatter(dofmap, local, cells=None):
    """Accumulate per-cell (m, k, k) matrices into an interior-dof CSR matrix."""
    mesh = dofmap.mesh
    conn = mesh.cells if cells is None else mesh.cells[cells]
    dofs = dofmap.vertex_to_dof[conn]  # (m, dim+1)
    k = conn.shape[1]
    ii = np.repeat(dofs, k, axis=1).ravel()
    jj = np.tile(dofs, (1, k)).ravel()
    vv = local.reshape(-1)
    keep = (ii >= 0) & (jj >= 0)
    n = dofmap.num_dofs
    return SparseMatrix.from_coo(n, n, ii[keep], jj[keep], vv[keep])


def element_stiffness(mesh, coeffs=None, rule=None):
    """Per-cell stiffness matrices, shape (nc, dim+1, dim+1)."""
    coeffs = coeffs or CoefficientField()
    grads = p1_gradients(mesh)
    if coeffs.is_laplacian:
        return np.abs(mesh.volumes)[:, None, None] * np.einsum(
            "cid,cjd->cij", grads, grads
        )
    rule = rule or gauss_rule(mesh.dim, ASSEMBLY_DEGREE)
    phys = physical_points(mesh, rule)  # (nc, K, dim)
    flat = phys.reshape(-1, mesh.dim)
    wdet = rule.weights[None, :] * mesh.jacobian_dets[:, None]  # (nc, K)
    local = np.zeros((mesh.num_cells, mesh.dim + 1, mesh.dim + 1))
    if coeffs.diffusion is not None:
        a = np.asarray(coeffs.diffusion(flat), dtype=float).reshape(
            mesh.num_cells, rule.num_points, mesh.dim, mesh.dim
        )
        aw = np.einsum("cq,cqde->cde", wdet, a)
        local += np.einsum("cid,cde,cje->cij", grads, aw, grads)
    else:
        local += mesh.jacobian_dets[:, None, None] * rule.weights.sum() * np.einsum(
            "cid,cjd->cij", grads, grads
        )
    if coeffs.reaction is not None:
        a0 = np.asarray(coeffs.reaction(flat), dtype=float).reshape(
            mesh.num_cells, rule.num_points
        )
        local += np.einsum("cq,qi,qj->cij", wdet * a0, rule.points, rule.points)
    return local


def element_mass(mesh):
    """Per-cell P1 mass matrices vol/((d+1)(d+2)) * (1 + I), exact."""
    d = mesh.dim
    base = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    return np.abs(mesh.volumes)[:, None, None] * base[None, :, :]


def assemble_stiffness(mesh, dofmap, coeffs=None, rule=None):
    """Interior-dof matrix of the bilinear form of the elliptic operator."""
    return _scatter(dofmap, element_stiffness(mesh, coeffs, rule))


def assemble_mass(mesh, dofmap):
    """Interior-dof L2 mass matrix (exact, no quadrature)."""
    return _scatter(dofmap, element_mass(mesh))


def assemble_weighted_mass(mesh, dofmap, c, rule=None):
    """Mass matrix weighted by a pointwise factor, computed by quadrature."""
    rule = rule or gauss_rule(mesh.dim, ASSEMBLY_DEGREE)
    cfield = _as_field(c)
    n = dofmap.num_dofs
    rr, cc, vv = [], [], []
    for start in range(0, mesh.num_cells, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, mesh.num_cells))
        phys = physical_points(mesh, rule, idx)
        cvals = cfield.values_on_cells(idx, rule.points, phys)  # (m, K)
        wdet = rule.weights[None, :] * mesh.jacobian_dets[idx, None]
        local = np.einsum("cq,qi,qj->cij", wdet * cvals, rule.points, rule.points)
        part = _scatter(dofmap, local, cells=idx)
        counts = np.diff(part.row_offsets)
        rr.append(np.repeat(np.arange(n, dtype=np.int64), counts))
        cc.append(part.col_indices)
        vv.append(part.values)
    return SparseMatrix.from_coo(
        n, n, np.concatenate(rr), np.concatenate(cc), np.concatenate(vv)
    )


def assemble_load(mesh, dofmap, f, rule=None):
    """Load vector (f, phi_z) over the interior basis, by quadrature."""
    rule = rule or gauss_rule(mesh.dim, ASSEMBLY_DEGREE)
    field = _as_field(f)
    out = np.zeros(dofmap.num_dofs)
    for start in range(0, mesh.num_cells, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, mesh.num_cells))
        phys = physical_points(mesh, rule, idx)
        fvals = field.values_on_cells(idx, rule.points, phys)  # (m, K)
        wdet = rule.weights[None, :] * mesh.jacobian_dets[idx, None]
        local = (wdet * fvals) @ rule.points  # (m, dim+1)
        dofs = dofmap.vertex_to_dof[mesh.cells[idx]]
        keep = dofs >= 0
        out += np.bincount(dofs[keep], weights=local[keep], minlength=out.shape[0])
    return out


def assemble_point_load(dofmap, omega, g):
    """Vector g * phi_z(omega) over interior dofs."""
    mesh = dofmap.mesh
    loc = locate_point(mesh, omega)
    out = np.zeros(dofmap.num_dofs)
    verts = mesh.cells[loc.cell_index]
    for lam, v in zip(loc.barycentric, verts):
        dof = dofmap.vertex_to_dof[v]
        if dof >= 0:
            out[dof] += g * lam
    return out


def assemble_point_matrix(mesh, dofmap, omega):
    """Rank-one matrix phi_z(omega) phi_zbar(omega) over interior dofs."""
    g = assemble_point_load(dofmap, omega, 1.0)
    nz = np.nonzero(g)[0]
    ii = np.repeat(nz, nz.shape[0])
    jj = np.tile(nz, nz.shape[0])
    vv = np.outer(g[nz], g[nz]).ravel()
    n = dofmap.num_dofs
    return SparseMatrix.from_coo(n, n, ii, jj, vv)


def evaluate(fe, x):
    """Point value of a finite element function (0 on boundary vertices)."""
    mesh = fe.dofmap.mesh
    loc = locate_point(mesh, x)
    nodal = fe.padded()[mesh.cells[loc.cell_index]]
    return float(np.dot(loc.barycentric, nodal))


def l2_error(approx, exact, mesh, rule):
    """L2 norm over the mesh of (approx - exact).

    ``approx`` must expose ``values_on_cells`` (an FeFunction or a projected
    control); ``exact`` is a pointwise callable.  Cells are reduced in index
    order, so repeated runs agree bit for bit.
    """
    afield = _as_field(approx)
    efield = _as_field(exact)
    dets = mesh.jacobian_dets
    acc = 0.0
    for start in range(0, mesh.num_cells, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, mesh.num_cells))
        phys = physical_points(mesh, rule, idx)
        diff = afield.values_on_cells(idx, rule.points, phys) - efield.values_on_cells(
            idx, rule.points, phys
        )
        acc += float(np.dot(dets[idx], (diff * diff) @ rule.weights))
    return float(np.sqrt(acc))
