"""Gaussian quadrature on reference simplices and mesh integration.

Rules come from the conical-product construction: tensorised Gauss-Legendre
and Gauss-Jacobi rules pushed through the Duffy map onto the reference
triangle/tetrahedron.  They are exact for all polynomials up to the requested
degree, every weight is positive, and every point is interior to the simplex
(so integrands with vertex singularities are never sampled at the singular
point).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import UnsupportedDegree

MAX_DEGREE = 10

#: default exactness for operator/load assembly
ASSEMBLY_DEGREE = 5
#: default exactness for error norms
ERROR_DEGREE = 10


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points (barycentric) and weights on the reference simplex.

    Weights sum to the reference volume (1/2 for the triangle, 1/6 for the
    tetrahedron) and the rule integrates all polynomials of total degree up
    to ``degree`` exactly.
    """

    dim: int
    degree: int
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def num_points(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class ReferenceMap:
    """Affine map from the reference simplex onto one mesh cell."""

    cell_index: int
    jacobian: np.ndarray
    jacobian_det: float
    offset: np.ndarray


def reference_map(mesh, cell_index):
    det = float(mesh.jacobian_dets[cell_index])
    if det <= 0:
        raise ValueError(f"cell {cell_index} is not positively oriented")
    return ReferenceMap(
        cell_index=int(cell_index),
        jacobian=mesh.jacobians[cell_index],
        jacobian_det=det,
        offset=mesh.vertices[mesh.cells[cell_index, 0]],
    )


def _gauss_legendre_01(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _gauss_jacobi_01(m, alpha):
    # nodes/weights for the weight (1-t)^alpha on [0, 1]
    x, w = roots_jacobi(m, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def gauss_rule(dim, degree):
    """Smallest conical-product rule on the reference simplex with the
    requested polynomial exactness ``degree`` (1 <= degree <= 10)."""
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if not 1 <= degree <= MAX_DEGREE:
        raise UnsupportedDegree(f"degree must be in [1, {MAX_DEGREE}], got {degree}")
    m = (degree + 2) // 2  # 2m - 1 >= degree
    gx, wx = _gauss_legendre_01(m)
    gy, wy = _gauss_jacobi_01(m, 1.0)
    if dim == 2:
        # x = xi (1 - eta), y = eta; Jacobian (1 - eta) is the GJ weight
        xi, eta = np.meshgrid(gx, gy, indexing="ij")
        x = xi * (1.0 - eta)
        y = eta
        w = np.outer(wx, wy)
        coords = np.column_stack([x.ravel(), y.ravel()])
    else:
        gz, wz = _gauss_jacobi_01(m, 2.0)
        xi, eta, zeta = np.meshgrid(gx, gy, gz, indexing="ij")
        x = xi * (1.0 - eta) * (1.0 - zeta)
        y = eta * (1.0 - zeta)
        z = zeta
        w = wx[:, None, None] * wy[None, :, None] * wz[None, None, :]
        coords = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    lam0 = 1.0 - coords.sum(axis=1)
    points = np.column_stack([lam0, coords])
    return QuadratureRule(dim, degree, points, w.ravel())


def physical_points(mesh, rule, cell_indices=None):
    """Quadrature points pushed onto cells, shape (ncells, K, dim)."""
    cells = mesh.cells if cell_indices is None else mesh.cells[cell_indices]
    return np.einsum("qk,ckd->cqd", rule.points, mesh.vertices[cells])


def integrate(mesh, rule, integrand, chunk=65536):
    """Quadrature of a pointwise function over the whole mesh.

    ``integrand`` is called with an (n, dim) array of physical coordinates
    and must return n values.  Cells are processed in index order with an
    ordered reduction, so results are reproducible bit for bit.
    """
    if rule.dim != mesh.dim:
        raise ValueError("rule dimension does not match mesh dimension")
    dets = mesh.jacobian_dets
    total = 0.0
    for start in range(0, mesh.num_cells, chunk):
        idx = np.arange(start, min(start + chunk, mesh.num_cells))
        phys = physical_points(mesh, rule, idx)
        vals = np.asarray(integrand(phys.reshape(-1, mesh.dim)), dtype=float)
        vals = vals.reshape(idx.size, rule.num_points)
        total += float(np.dot(dets[idx], vals @ rule.weights))
    return total
