"""Sparse operators and the iterative/direct solvers used by the scheme.

Mass matrices of the velocity and vorticity spaces are solved with
Jacobi-preconditioned conjugate gradients; their condition numbers do not
grow under mesh refinement, so iteration counts stay bounded.  Mass
matrices of the fully discontinuous depth space are block diagonal with
at most 3x3 blocks and are solved exactly cell by cell.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class SolverError(Exception):
    """Iterative solver failed; carries the final SolverReport."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SolverReport:
    iterations: int
    residual: float       # relative to ||b||
    converged: bool


@dataclass
class SparseOperator:
    """Row-compressed sparse matrix with optional structure hints.

    `symmetric` marks operators assembled from symmetric bilinear forms.
    `blocks`, when present, holds the (ncells, b, b) dense diagonal blocks
    of a discontinuous-space mass matrix (cell-major numbering).
    """

    matrix: sp.csr_matrix
    symmetric: bool = False
    blocks: np.ndarray = None

    @classmethod
    def from_coo(cls, rows, cols, values, shape, symmetric=False,
                 blocks=None):
        mat = sp.coo_matrix((values, (rows, cols)), shape=shape).tocsr()
        mat.sum_duplicates()
        return cls(matrix=mat, symmetric=symmetric, blocks=blocks)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def values(self):
        return self.matrix.data

    @property
    def row_pointers(self):
        return self.matrix.indptr

    @property
    def column_indices(self):
        return self.matrix.indices

    def matvec(self, x):
        return self.matrix @ x

    def diagonal(self):
        return self.matrix.diagonal()

    def transpose_matvec(self, x):
        return self.matrix.T @ x

    def symmetry_defect(self):
        d = self.matrix - self.matrix.T
        return np.abs(d.data).max() if d.nnz else 0.0


def cg_solve(A, b, tol=1e-12, maxit=None, x0=None):
    """Conjugate gradients with Jacobi preconditioning.

    Solves A x = b for symmetric positive definite A to a relative
    residual ||A x - b|| <= tol ||b||.  Returns (x, SolverReport); raises
    SolverError when maxit is exceeded.  Fully deterministic.
    """
    mat = A.matrix if isinstance(A, SparseOperator) else A
    n = mat.shape[0]
    if mat.shape[0] != mat.shape[1]:
        raise ValueError("cg_solve requires a square operator")
    if len(b) != n:
        raise ValueError(f"dimension mismatch: operator {mat.shape}, "
                         f"vector {len(b)}")
    if maxit is None:
        maxit = max(50, int(10 * np.sqrt(n)))

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolverReport(0, 0.0, True)

    dinv = 1.0 / mat.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - mat @ x if x0 is not None else b.copy()
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    rnorm = float(np.linalg.norm(r))

    it = 0
    while rnorm > tol * bnorm and it < maxit:
        Ap = mat @ p
        alpha = rz / float(p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rnorm = float(np.linalg.norm(r))
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1

    report = SolverReport(it, rnorm / bnorm, rnorm <= tol * bnorm)
    if not report.converged:
        raise SolverError(f"CG did not converge in {it} iterations "
                          f"(relative residual {report.residual:.3e}, "
                          f"tolerance {tol:.1e})", report)
    return x, report


def block_diag_solve(A, b):
    """Exact solve of a block-diagonal mass matrix (DG spaces).

    `A` must carry its diagonal blocks (ncells, bs, bs); the right-hand
    side is reshaped cell-major.  Raises SolverError on a singular block,
    which signals a degenerate cell.
    """
    if not isinstance(A, SparseOperator) or A.blocks is None:
        raise ValueError("block_diag_solve requires an operator assembled "
                         "with cell-local blocks")
    blocks = A.blocks
    ncells, bs, _ = blocks.shape
    if len(b) != ncells * bs:
        raise ValueError("right-hand side does not match block structure")
    try:
        x = np.linalg.solve(blocks, b.reshape(ncells, bs, 1))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular mass block (degenerate cell): "
                          f"{exc}") from exc
    return x.reshape(-1)
