"""Compressed-row matrices, BiCGStab with ILU(0)/Gauss-Seidel, dense oracle.

The iterative solver and preconditioners are hand-rolled on CSR arrays so
the hot loops can run through the numba kernels in :mod:`._kernels`; the
dense oracle delegates to LAPACK via numpy and exists purely to cross-check
the iterative path in tests.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import Breakdown, DimensionMismatch, MaxIterations, SingularMatrix

_TINY = 1e-300


@dataclass
class SparseMatrix:
    """Real matrix in compressed sparse row format.

    Column indices are strictly increasing within each row and duplicates
    have been merged; :meth:`from_coo` enforces both.
    """

    rows: int
    cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @classmethod
    def from_coo(cls, rows, cols, r, c, v):
        """Build from coordinate triplets, summing duplicate entries."""
        r = np.asarray(r, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        v = np.asarray(v, dtype=np.float64)
        if r.size == 0:
            return cls(rows, cols, np.zeros(rows + 1, dtype=np.int64),
                       np.zeros(0, dtype=np.int64), np.zeros(0))
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        first = np.concatenate([[True], (np.diff(r) != 0) | (np.diff(c) != 0)])
        starts = np.nonzero(first)[0]
        vals = np.add.reduceat(v, starts)
        rr, cc = r[starts], c[starts]
        offsets = np.zeros(rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rr, minlength=rows), out=offsets[1:])
        return cls(rows, cols, offsets, cc, vals)

    @property
    def nnz(self):
        return self.values.shape[0]

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.cols:
            raise DimensionMismatch(
                f"matvec: matrix is {self.rows}x{self.cols}, vector has {x.shape[0]}"
            )
        out = np.empty(self.rows)
        _kernels.csr_matvec(self.row_offsets, self.col_indices, self.values, x, out)
        return out

    def __matmul__(self, x):
        return self.matvec(x)

    def to_dense(self):
        dense = np.zeros((self.rows, self.cols))
        counts = np.diff(self.row_offsets)
        rows = np.repeat(np.arange(self.rows), counts)
        dense[rows, self.col_indices] = self.values
        return dense

    def diagonal_index(self):
        """Position of each diagonal entry inside ``values`` (must exist)."""
        counts = np.diff(self.row_offsets)
        rows = np.repeat(np.arange(self.rows, dtype=np.int64), counts)
        hits = np.nonzero(self.col_indices == rows)[0]
        if hits.shape[0] != self.rows:
            missing = np.setdiff1d(np.arange(self.rows), rows[hits])
            raise ValueError(f"row {missing[0]} has no stored diagonal entry")
        return hits

    def scaled(self, factor):
        return SparseMatrix(self.rows, self.cols, self.row_offsets,
                            self.col_indices, factor * self.values)


@dataclass
class BlockSystem:
    """The 2x2 saddle system [[A, (1/nu) C_tr], [-C_bl, A]].

    Blocks are stored unscaled; the 1/nu factor and the minus sign on the
    bottom-left coupling are applied when the monolithic matrix is formed.
    """

    A: SparseMatrix
    coupling_topright: SparseMatrix
    coupling_bottomleft: SparseMatrix
    nu: float
    rhs_top: Optional[np.ndarray] = None
    rhs_bottom: Optional[np.ndarray] = None

    @property
    def block_size(self):
        return self.A.rows

    def monolithic(self):
        n = self.block_size
        blocks = (
            (self.A, 0, 0, 1.0),
            (self.coupling_topright, 0, n, 1.0 / self.nu),
            (self.coupling_bottomleft, n, 0, -1.0),
            (self.A, n, n, 1.0),
        )
        rr, cc, vv = [], [], []
        for mat, roff, coff, scale in blocks:
            counts = np.diff(mat.row_offsets)
            rr.append(np.repeat(np.arange(n, dtype=np.int64), counts) + roff)
            cc.append(mat.col_indices + coff)
            vv.append(scale * mat.values)
        return SparseMatrix.from_coo(
            2 * n, 2 * n, np.concatenate(rr), np.concatenate(cc), np.concatenate(vv)
        )


def assemble_block(A, coupling_topright, coupling_bottomleft, nu,
                   rhs_top=None, rhs_bottom=None):
    """Validate dimensions and wrap the blocks into a :class:`BlockSystem`."""
    n = A.rows
    for name, mat in (("A", A), ("coupling_topright", coupling_topright),
                      ("coupling_bottomleft", coupling_bottomleft)):
        if mat.rows != n or mat.cols != n:
            raise DimensionMismatch(
                f"block {name} is {mat.rows}x{mat.cols}, expected {n}x{n}"
            )
    for name, vec in (("rhs_top", rhs_top), ("rhs_bottom", rhs_bottom)):
        if vec is not None and vec.shape[0] != n:
            raise DimensionMismatch(f"{name} has length {vec.shape[0]}, expected {n}")
    return BlockSystem(A, coupling_topright, coupling_bottomleft, nu,
                       rhs_top, rhs_bottom)


@dataclass
class SolverReport:
    iterations: int
    final_residual: float
    converged: bool


class ILU0:
    """Incomplete LU factorisation on the sparsity pattern of the matrix."""

    def __init__(self, matrix):
        self.row_offsets = matrix.row_offsets
        self.col_indices = matrix.col_indices
        self.values = matrix.values.copy()
        self.diag_index = matrix.diagonal_index()
        bad = _kernels.ilu0_factor(
            self.row_offsets, self.col_indices, self.values, self.diag_index
        )
        if bad >= 0:
            raise SingularMatrix(f"ILU(0) hit a zero pivot in row {bad}")

    def apply(self, r):
        out = np.empty_like(r)
        _kernels.ilu0_solve(self.row_offsets, self.col_indices, self.values,
                            self.diag_index, r, out)
        return out


class GaussSeidel:
    """One forward sweep with the lower triangle, used as a preconditioner."""

    def __init__(self, matrix):
        self.matrix = matrix

    def apply(self, r):
        out = np.empty_like(r)
        _kernels.gauss_seidel_sweep(self.matrix.row_offsets, self.matrix.col_indices,
                                    self.matrix.values, r, out)
        return out


def _make_precond(precond, matrix):
    if precond is None or precond == "none":
        return None
    if isinstance(precond, str):
        if precond == "ilu0":
            return ILU0(matrix)
        if precond == "gauss_seidel":
            return GaussSeidel(matrix)
        raise ValueError(f"unknown preconditioner {precond!r}")
    return precond


def bicgstab(system, rhs, precond="ilu0", tol=1e-12, maxit=None):
    """BiCGStab with deterministic right preconditioning.

    ``system`` is a :class:`SparseMatrix` or a :class:`BlockSystem` (which is
    assembled into its monolithic matrix first).  Convergence means the true
    relative residual ||b - A x|| / ||b|| drops below ``tol``.  Raises
    :class:`Breakdown` on a vanishing inner product and
    :class:`MaxIterations` when the budget (default 10 n) is exhausted.
    """
    A = system.monolithic() if isinstance(system, BlockSystem) else system
    b = np.asarray(rhs, dtype=np.float64)
    if A.rows != A.cols:
        raise DimensionMismatch("bicgstab needs a square matrix")
    if b.shape[0] != A.rows:
        raise DimensionMismatch("rhs length does not match the matrix")
    n = A.rows
    if maxit is None:
        maxit = 10 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolverReport(0, 0.0, True)
    K = _make_precond(precond, A)
    apply_K = (lambda v: v) if K is None else K.apply

    x = np.zeros(n)
    r = b.copy()
    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)

    def finish(iters):
        true_res = float(np.linalg.norm(b - A.matvec(x))) / bnorm
        return true_res

    for it in range(1, maxit + 1):
        rho_new = float(rhat @ r)
        if abs(rho_new) < _TINY or not np.isfinite(rho_new):
            raise Breakdown(f"rho breakdown at iteration {it}")
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = apply_K(p)
        v = A.matvec(phat)
        denom = float(rhat @ v)
        if abs(denom) < _TINY or not np.isfinite(denom):
            raise Breakdown(f"rhat.v breakdown at iteration {it}")
        alpha = rho_new / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= tol * bnorm:
            x = x + alpha * phat
            true_res = finish(it)
            if true_res <= tol:
                return x, SolverReport(it, true_res, True)
            r = b - A.matvec(x)
            continue
        shat = apply_K(s)
        t = A.matvec(shat)
        tt = float(t @ t)
        if tt < _TINY:
            raise Breakdown(f"t.t breakdown at iteration {it}")
        omega = float(t @ s) / tt
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        if abs(omega) < _TINY:
            raise Breakdown(f"omega breakdown at iteration {it}")
        if np.linalg.norm(r) <= tol * bnorm:
            true_res = finish(it)
            if true_res <= tol:
                return x, SolverReport(it, true_res, True)
            r = b - A.matvec(x)
    final = float(np.linalg.norm(b - A.matvec(x))) / bnorm
    raise MaxIterations(
        f"bicgstab: no convergence in {maxit} iterations "
        f"(relative residual {final:.3e} > {tol:.3e})",
        report=SolverReport(maxit, final, False),
    )


def dense_solve_oracle(matrix, rhs, max_dim=5000):
    """Partial-pivot LU direct solve, the verification oracle.

    Accepts a :class:`SparseMatrix` or a dense array; refuses systems larger
    than ``max_dim`` and raises :class:`SingularMatrix` when LAPACK reports
    an exactly singular factor.
    """
    dense = matrix.to_dense() if isinstance(matrix, SparseMatrix) else np.asarray(matrix, dtype=float)
    if dense.shape[0] != dense.shape[1]:
        raise DimensionMismatch("dense oracle needs a square matrix")
    if dense.shape[0] > max_dim:
        raise ValueError(f"dense oracle limited to dimension {max_dim}")
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != dense.shape[0]:
        raise DimensionMismatch("rhs length does not match the matrix")
    try:
        return np.linalg.solve(dense, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc


def write_matrix_market(matrix, path, comment="pointctl matrix"):
    """Write a SparseMatrix in MatrixMarket coordinate format."""
    counts = np.diff(matrix.row_offsets)
    rows = np.repeat(np.arange(matrix.rows), counts)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"% {comment}\n")
        fh.write(f"{matrix.rows} {matrix.cols} {matrix.nnz}\n")
        for i, j, val in zip(rows, matrix.col_indices, matrix.values):
            fh.write(f"{i + 1} {j + 1} {val:.16e}\n")
