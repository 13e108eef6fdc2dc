import numpy as np
import pytest

from pointctl.assembly import DofMap, assemble_mass, assemble_point_matrix, assemble_stiffness
from pointctl.errors import Breakdown, DimensionMismatch, MaxIterations, SingularMatrix
from pointctl.mesh import build_unit_disk, build_unit_square
from pointctl.sparse import (
    ILU0,
    GaussSeidel,
    SparseMatrix,
    assemble_block,
    bicgstab,
    dense_solve_oracle,
    write_matrix_market,
)


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def to_sparse(dense):
    r, c = np.nonzero(dense)
    return SparseMatrix.from_coo(*dense.shape, r, c, dense[r, c])


def test_from_coo_merges_duplicates():
    rng = np.random.default_rng(0)
    n, nnz = 9, 120
    r = rng.integers(0, n, nnz)
    c = rng.integers(0, n, nnz)
    v = rng.standard_normal(nnz)
    dense = np.zeros((n, n))
    np.add.at(dense, (r, c), v)
    sm = SparseMatrix.from_coo(n, n, r, c, v)
    assert np.abs(sm.to_dense() - dense).max() < 1e-14
    assert all(
        np.all(np.diff(sm.col_indices[sm.row_offsets[i]: sm.row_offsets[i + 1]]) > 0)
        for i in range(n)
    )


def test_matvec_against_dense():
    dense = random_spd(17, 1)
    sm = to_sparse(dense)
    x = np.linspace(-1, 1, 17)
    assert np.allclose(sm @ x, dense @ x, atol=1e-12)


def test_bicgstab_identity_single_iteration():
    sm = to_sparse(np.eye(6))
    b = np.arange(1.0, 7.0)
    x, report = bicgstab(sm, b, precond=None, tol=1e-12)
    assert report.iterations <= 1
    assert np.allclose(x, b, atol=1e-12)


def test_bicgstab_block_system_matches_dense_oracle():
    mesh = build_unit_square(4)
    dm = DofMap(mesh)
    A = assemble_stiffness(mesh, dm)
    M = assemble_mass(mesh, dm)
    P = assemble_point_matrix(mesh, dm, (0.3, 0.55))
    nu = 1e-2
    system = assemble_block(A, M, P, nu)
    mono = system.monolithic()
    rng = np.random.default_rng(5)
    b = rng.standard_normal(mono.rows)
    x_it, _ = bicgstab(mono, b, precond="ilu0", tol=1e-13)
    x_or = dense_solve_oracle(mono, b)
    assert np.abs(x_it - x_or).max() <= 1e-9


def test_ilu0_reduces_iterations():
    rng = np.random.default_rng(11)
    n = 50
    dense = np.abs(rng.standard_normal((n, n)))
    dense = -(dense + dense.T)
    np.fill_diagonal(dense, np.abs(dense).sum(axis=1) + 1.0)  # SDD M-matrix
    sm = to_sparse(dense)
    b = rng.standard_normal(n)
    _, rep_plain = bicgstab(sm, b, precond=None, tol=1e-10)
    _, rep_ilu = bicgstab(sm, b, precond="ilu0", tol=1e-10)
    assert rep_ilu.iterations < rep_plain.iterations


def test_gauss_seidel_preconditioner_converges():
    mesh = build_unit_square(8)
    dm = DofMap(mesh)
    A = assemble_stiffness(mesh, dm)
    b = np.ones(A.rows)
    x, report = bicgstab(A, b, precond="gauss_seidel", tol=1e-11)
    assert report.converged
    assert np.linalg.norm(b - A @ x) <= 1e-11 * np.linalg.norm(b)
    gs = GaussSeidel(A)
    z = gs.apply(b)
    # one forward sweep: (D + L) z = b
    dense = A.to_dense()
    lower = np.tril(dense)
    assert np.allclose(lower @ z, b, atol=1e-12)


def test_bicgstab_maxit_raises():
    mesh = build_unit_square(8)
    dm = DofMap(mesh)
    A = assemble_stiffness(mesh, dm)
    b = np.ones(A.rows)
    with pytest.raises(MaxIterations) as info:
        bicgstab(A, b, precond=None, tol=1e-14, maxit=3)
    assert info.value.report.iterations == 3
    assert not info.value.report.converged


def test_bicgstab_breakdown_on_singular():
    # rank-deficient matrix with rhs outside the range
    dense = np.zeros((3, 3))
    dense[0, 0] = 1.0
    dense[1, 1] = 1.0
    sm = to_sparse(dense)
    with pytest.raises((Breakdown, MaxIterations)):
        bicgstab(sm, np.array([1.0, 1.0, 1.0]), precond=None, tol=1e-12, maxit=50)


def test_dense_oracle_identity():
    assert np.allclose(dense_solve_oracle(np.eye(4), np.arange(4.0)), np.arange(4.0))


def test_dense_oracle_hilbert():
    n = 5
    H = np.array([[1.0 / (i + j + 1) for j in range(n)] for i in range(n)])
    b = H.sum(axis=1)
    x = dense_solve_oracle(H, b)
    assert np.abs(x - 1.0).max() <= 1e-8


def test_dense_oracle_spd_residual():
    A = random_spd(20, 3)
    rng = np.random.default_rng(4)
    b = rng.standard_normal(20)
    x = dense_solve_oracle(A, b)
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) <= 1e-11


def test_dense_oracle_singular_raises():
    dense = np.ones((3, 3))
    with pytest.raises(SingularMatrix):
        dense_solve_oracle(dense, np.ones(3))


def test_dense_oracle_size_limit():
    with pytest.raises(ValueError):
        dense_solve_oracle(np.eye(5001), np.zeros(5001))


def test_assemble_block_shape_checks():
    mesh = build_unit_square(3)
    dm = DofMap(mesh)
    A = assemble_stiffness(mesh, dm)
    M = assemble_mass(mesh, dm)
    small = SparseMatrix.from_coo(2, 2, [0, 1], [0, 1], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        assemble_block(A, small, M, 1.0)
    with pytest.raises(DimensionMismatch):
        assemble_block(A, M, small, 1.0)
    with pytest.raises(DimensionMismatch):
        assemble_block(A, M, M, 1.0, rhs_top=np.zeros(3))
    system = assemble_block(A, M, M, 2.0)
    mono = system.monolithic()
    n = A.rows
    dense = mono.to_dense()
    assert np.allclose(dense[:n, n:], 0.5 * M.to_dense(), atol=1e-14)
    assert np.allclose(dense[n:, :n], -M.to_dense(), atol=1e-14)


def test_ilu0_no_zero_pivots_on_stiffness():
    for mesh in (build_unit_square(6), build_unit_disk(2)):
        dm = DofMap(mesh)
        A = assemble_stiffness(mesh, dm)
        ilu = ILU0(A)  # raises SingularMatrix on a zero pivot
        assert np.all(ilu.values[ilu.diag_index] != 0.0)


def test_bicgstab_vs_oracle_on_benchmark_meshes():
    for mesh in (build_unit_square(16), build_unit_disk(2)):
        dm = DofMap(mesh)
        if dm.num_dofs > 2500:
            continue
        A = assemble_stiffness(mesh, dm)
        rng = np.random.default_rng(8)
        b = rng.standard_normal(A.rows)
        x_it, _ = bicgstab(A, b, precond="ilu0", tol=1e-12)
        x_or = dense_solve_oracle(A, b)
        assert np.abs(x_it - x_or).max() <= 1e-8


def test_matrix_market_roundtrip(tmp_path):
    import scipy.io

    dense = random_spd(6, 9)
    dense[np.abs(dense) < np.quantile(np.abs(dense), 0.3)] = 0.0
    sm = to_sparse(dense)
    path = tmp_path / "mat.mtx"
    write_matrix_market(sm, path)
    back = scipy.io.mmread(path).toarray()
    assert np.abs(back - sm.to_dense()).max() < 1e-12
