"""Dense LU, GMRES, Ruiz equilibration, Schur-diagonal preconditioner.

Sparse matrices are scipy CSR in canonical form (sorted indices). Dense
factorizations and the diagnostics eigensolver delegate to LAPACK via
scipy; GMRES and everything specific to the saddle-point structure of the
time-stepping system is implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class GmresError(RuntimeError):
    """GMRES hit the iteration cap; carries the best iterate found."""

    def __init__(self, msg, best_x, residual, iters):
        super().__init__(msg)
        self.best_x = best_x
        self.residual = residual
        self.iters = iters


def make_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    """Canonical CSR (sorted indices, summed duplicates) from triplets."""
    A = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


# ----------------------------------------------------------------------
# Dense LU
# ----------------------------------------------------------------------

def lu_factor(A: np.ndarray):
    """Partial-pivoted LU factorization of a square dense matrix."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("lu_factor expects a square matrix")
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        raise SingularMatrixError("zero pivot in LU factorization")
    return lu, piv


def lu_solve(factors, rhs: np.ndarray) -> np.ndarray:
    """Back-substitution for one or more right-hand-side columns."""
    return sla.lu_solve(factors, rhs, check_finite=False)


# ----------------------------------------------------------------------
# GMRES (left-preconditioned, no restart)
# ----------------------------------------------------------------------

def _as_matvec(A):
    if callable(A):
        return A
    return lambda v: A @ v


def _as_precond(M):
    if M is None:
        return lambda v: v
    if isinstance(M, SaddlePrecond):
        return M.apply
    if isinstance(M, np.ndarray) and M.ndim == 1:
        return lambda v: M * v
    if callable(M):
        return M
    return lambda v: M @ v


def gmres(A, b, x0=None, tol=1e-8, maxit=500, precond=None):
    """Solve A x = b with left-preconditioned full GMRES.

    Returns ``(x, iters, resnorms)`` where resnorms are the preconditioned
    residual norms per iteration. Convergence when the preconditioned
    residual drops to ``tol * ||M b||``. Raises :class:`GmresError` with the
    best iterate once ``maxit`` is exceeded.
    """
    matvec = _as_matvec(A)
    apply_m = _as_precond(precond)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if x0 is None:
        x0 = np.zeros(n)
    mb_norm = np.linalg.norm(apply_m(b))
    target = tol * mb_norm
    r0 = apply_m(b - matvec(x0))
    beta = np.linalg.norm(r0)
    resnorms = [beta]
    if beta <= target or beta == 0.0:
        return x0.copy(), 0, resnorms

    maxit = min(maxit, n)
    V = np.empty((maxit + 1, n))
    H = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    V[0] = r0 / beta

    def assemble(j):
        y = sla.solve_triangular(H[: j + 1, : j + 1], g[: j + 1], check_finite=False)
        return x0 + V[: j + 1].T @ y

    for j in range(maxit):
        w = apply_m(matvec(V[j]))
        for i in range(j + 1):
            H[i, j] = V[i] @ w
            w -= H[i, j] * V[i]
        hnext = np.linalg.norm(w)
        H[j + 1, j] = hnext
        # apply accumulated Givens rotations to the new column
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        denom = np.hypot(H[j, j], H[j + 1, j])
        if denom == 0.0:
            cs[j], sn[j] = 1.0, 0.0
        else:
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
        H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        res = abs(g[j + 1])
        resnorms.append(res)
        if res <= target or hnext == 0.0:
            return assemble(j), j + 1, resnorms
        V[j + 1] = w / hnext

    x = assemble(maxit - 1)
    raise GmresError(
        f"GMRES did not reach tol={tol:g} within {maxit} iterations "
        f"(residual {resnorms[-1]:.3e}, target {target:.3e})",
        best_x=x,
        residual=resnorms[-1],
        iters=maxit,
    )


# ----------------------------------------------------------------------
# Ruiz equilibration
# ----------------------------------------------------------------------

def equilibrate(A: sp.spmatrix, max_sweeps: int = 20):
    """Iterative row/column scaling of a sparse matrix.

    Returns ``(r, c, B)`` with ``B = diag(r) A diag(c)`` whose row and
    column max-magnitudes land in [0.5, 2].
    """
    B = sp.csr_matrix(A, dtype=np.float64, copy=True)
    m, n = B.shape
    r = np.ones(m)
    c = np.ones(n)
    for _ in range(max_sweeps):
        absB = abs(B)
        row_max = np.asarray(absB.max(axis=1).todense()).ravel()
        col_max = np.asarray(absB.max(axis=0).todense()).ravel()
        if np.any(row_max == 0.0):
            raise ValueError("equilibrate: matrix has an identically zero row")
        if np.any(col_max == 0.0):
            raise ValueError("equilibrate: matrix has an identically zero column")
        if (
            row_max.min() >= 0.5 and row_max.max() <= 2.0
            and col_max.min() >= 0.5 and col_max.max() <= 2.0
        ):
            break
        dr = 1.0 / np.sqrt(row_max)
        dc = 1.0 / np.sqrt(col_max)
        B = sp.diags(dr) @ B @ sp.diags(dc)
        r *= dr
        c *= dc
    B = B.tocsr()
    B.sort_indices()
    return r, c, B


# ----------------------------------------------------------------------
# Diagonal Schur-complement preconditioner
# ----------------------------------------------------------------------

@dataclass
class SaddlePrecond:
    """Inverse diagonal of the block preconditioner [diag(A11); diag(Stilde)]."""

    inv_diag: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.inv_diag * v


def build_precond(B: sp.spmatrix, block_sizes) -> SaddlePrecond:
    """Diagonal preconditioner from the 2x2 block partition of ``B``.

    ``block_sizes = (N, N_b)``: the leading N rows/columns are the PDE
    block, the trailing N_b are the boundary-condition block. The Schur
    block is approximated as diag(B22 - B21 diag(B11)^{-1} B12).
    """
    N, Nb = block_sizes
    B = sp.csr_matrix(B)
    if B.shape != (N + Nb, N + Nb):
        raise ValueError("block sizes inconsistent with matrix shape")
    diag = B.diagonal()
    a11 = diag[:N]
    if np.any(a11 == 0.0):
        raise ValueError("zero diagonal entry in the A11 block")
    if Nb > 0:
        B21 = B[N:, :N].tocsr()
        B12T = B[:N, N:].T.tocsr()
        prod = B21.multiply(B12T)  # entry (i, k) = B21[i,k] * B12[k,i]
        corr = prod @ (1.0 / a11)
        shat = diag[N:] - corr
    else:
        shat = np.empty(0)
    p = np.concatenate([a11, shat])
    if np.any(p == 0.0):
        raise ValueError("preconditioner has a zero diagonal entry")
    return SaddlePrecond(inv_diag=1.0 / p)


# ----------------------------------------------------------------------
# Dense nonsymmetric eigensolver (diagnostics only)
# ----------------------------------------------------------------------

def eig_dense(A: np.ndarray, max_n: int = 1500) -> np.ndarray:
    """Full spectrum of a dense square matrix via Hessenberg + QR (LAPACK).

    Validates the result against the trace before returning; intended for
    diagnostics-scale matrices only.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("eig_dense expects a square matrix")
    if A.shape[0] > max_n:
        raise ValueError(f"matrix size {A.shape[0]} exceeds diagnostics cap {max_n}")
    vals = sla.eig(A, right=False, check_finite=False)
    scale = max(1.0, np.abs(A).sum(axis=0).max())
    if abs(vals.sum().real - np.trace(A)) > 1e-6 * scale or abs(vals.sum().imag) > 1e-6 * scale:
        raise ArithmeticError("eigenvalue sum fails the trace consistency check")
    return vals
