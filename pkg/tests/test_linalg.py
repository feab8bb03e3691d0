import numpy as np
import pytest
import scipy.sparse as sp

from swfem.linalg import (SolverError, SparseOperator, block_diag_solve,
                          cg_solve)
from swfem.mesh import structured_mesh
from swfem.spaces import assemble_mass, function_space, make_triple


def _op(dense, **kw):
    return SparseOperator(matrix=sp.csr_matrix(dense), **kw)


def test_identity_single_iteration():
    b = np.array([3.0, -1.0, 2.5])
    x, report = cg_solve(_op(np.eye(3)), b)
    np.testing.assert_allclose(x, b, atol=1e-15)
    assert report.iterations == 1
    assert report.converged


def test_diagonal_system():
    A = _op(np.diag([1.0, 2.0, 4.0]))
    x, _ = cg_solve(A, np.array([1.0, 2.0, 4.0]))
    np.testing.assert_allclose(x, 1.0, atol=1e-13)


def test_against_dense_oracle():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((10, 10))
    A = M.T @ M + np.eye(10)
    b = rng.standard_normal(10)
    expect = np.linalg.solve(A, b)   # dense Gaussian elimination oracle
    x, report = cg_solve(_op(A), b, tol=1e-13)
    np.testing.assert_allclose(x, expect, atol=1e-10)
    assert report.converged


def test_zero_rhs():
    x, report = cg_solve(_op(np.eye(4)), np.zeros(4))
    assert np.all(x == 0)
    assert report.iterations == 0


def test_nonconvergence_raises():
    rng = np.random.default_rng(6)
    M = rng.standard_normal((30, 30))
    A = M.T @ M + 1e-8 * np.eye(30)
    with pytest.raises(SolverError) as err:
        cg_solve(_op(A), rng.standard_normal(30), tol=1e-15, maxit=2)
    assert err.value.report.iterations == 2
    assert not err.value.report.converged


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        cg_solve(_op(np.eye(3)), np.zeros(4))


def test_determinism():
    rng = np.random.default_rng(7)
    M = rng.standard_normal((40, 40))
    A = _op(M.T @ M + np.eye(40))
    b = rng.standard_normal(40)
    x1, _ = cg_solve(A, b)
    x2, _ = cg_solve(A, b)
    assert np.array_equal(x1, x2)


# ---------------------------------------------------------------------------
# Block-diagonal solves
# ---------------------------------------------------------------------------


def test_dg0_blocks_are_cell_areas():
    mesh = structured_mesh(4)
    V = function_space(mesh, "DG0")
    m = assemble_mass(V)
    b = np.arange(1.0, 33.0)
    x = block_diag_solve(m, b)
    np.testing.assert_allclose(x, b / mesh.areas, rtol=1e-14)


def test_dg1_blocks_match_cg():
    mesh = structured_mesh(4)
    V = function_space(mesh, "DG1")
    m = assemble_mass(V)
    rng = np.random.default_rng(8)
    b = rng.standard_normal(V.dim)
    x_blocks = block_diag_solve(m, b)
    x_cg, _ = cg_solve(m, b, tol=1e-14)
    np.testing.assert_allclose(x_blocks, x_cg, atol=1e-12)
    # exact residual
    r = m.matrix @ x_blocks - b
    assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(b)


def test_block_solve_zero():
    mesh = structured_mesh(3)
    m = assemble_mass(function_space(mesh, "DG1"))
    assert np.all(block_diag_solve(m, np.zeros(m.shape[0])) == 0)


def test_block_solve_requires_blocks():
    with pytest.raises(ValueError, match="cell-local blocks"):
        block_diag_solve(_op(np.eye(3)), np.zeros(3))


def test_singular_block():
    blocks = np.zeros((2, 1, 1))
    op = SparseOperator(matrix=sp.csr_matrix((2, 2)), blocks=blocks)
    with pytest.raises(SolverError, match="singular"):
        block_diag_solve(op, np.ones(2))


# ---------------------------------------------------------------------------
# Mesh-independent conditioning
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("family", ["rt0", "bdm1", "bdfm1", "bdm2"])
def test_iteration_counts_mesh_independent(family):
    """Velocity mass matrices stay equally well conditioned under
    refinement: iteration counts in the resolved regime sit in a 25%
    band, and coarse meshes can only converge sooner (tiny Krylov spaces
    terminate early)."""
    counts = []
    for n in (8, 16, 32):
        t = make_triple(family, structured_mesh(n))
        m = assemble_mass(t.S)
        rng = np.random.default_rng(11)
        b = rng.standard_normal(t.S.dim)
        _, report = cg_solve(m, b, tol=1e-12)
        counts.append(report.iterations)
    # counts approach the condition-number-determined value from below
    # (small Krylov spaces terminate early), so anchor the 25% band at
    # the finest mesh
    assert max(counts) <= 1.25 * counts[-1]
