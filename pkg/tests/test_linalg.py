import numpy as np
import pytest
import scipy.sparse as sp

from overlapfd import linalg


def test_lu_identity():
    f = linalg.lu_factor(np.eye(4))
    b = np.arange(4.0)
    assert np.allclose(linalg.lu_solve(f, b), b)


def test_lu_forces_pivot():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    x = linalg.lu_solve(linalg.lu_factor(A), np.array([1.0, 2.0]))
    assert np.allclose(x, [2.0, 1.0])


def test_lu_random_residual():
    rng = np.random.default_rng(0)
    A = rng.random((50, 50)) + 50 * np.eye(50)
    b = rng.random(50)
    x = linalg.lu_solve(linalg.lu_factor(A), b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(A) * np.linalg.norm(x)


def test_lu_singular():
    with pytest.raises(linalg.SingularMatrixError):
        linalg.lu_factor(np.ones((3, 3)))


def test_gmres_identity():
    b = np.array([1.0, 2.0, 3.0])
    x, iters, _ = linalg.gmres(np.eye(3), b, tol=1e-12)
    assert iters <= 1
    assert np.allclose(x, b)


def test_gmres_diagonal_with_exact_inverse_precond():
    d = np.array([2.0, 5.0, 0.5, 8.0])
    A = np.diag(d)
    b = np.array([1.0, 1.0, 1.0, 1.0])
    x, iters, _ = linalg.gmres(A, b, tol=1e-12, precond=1.0 / d)
    assert iters == 1
    assert np.allclose(x, b / d)


def test_gmres_vs_dense_solve():
    rng = np.random.default_rng(1)
    A = rng.random((100, 100))
    A += np.diag(np.abs(A).sum(axis=1))  # diagonally dominant
    b = rng.random(100)
    x, iters, res = linalg.gmres(A, b, tol=1e-10, maxit=200)
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-6)
    # residual history nonincreasing
    assert all(b2 <= a2 + 1e-14 for a2, b2 in zip(res, res[1:]))


def test_gmres_maxit_error_carries_best():
    rng = np.random.default_rng(2)
    A = rng.random((60, 60)) + 10 * np.eye(60)
    b = rng.random(60)
    with pytest.raises(linalg.GmresError) as exc:
        linalg.gmres(A, b, tol=1e-14, maxit=3)
    assert exc.value.best_x.shape == (60,)
    assert exc.value.iters == 3


def test_gmres_warm_start_zero_iterations():
    rng = np.random.default_rng(3)
    A = rng.random((30, 30)) + 10 * np.eye(30)
    xtrue = rng.random(30)
    b = A @ xtrue
    x, iters, _ = linalg.gmres(A, b, x0=xtrue, tol=1e-8)
    assert iters == 0


def test_equilibrate_identity_like():
    A = sp.csr_matrix(np.diag([1.0, 1.5, 0.8]))
    r, c, B = linalg.equilibrate(A)
    assert np.allclose(r, 1.0, atol=0.5)
    assert np.allclose(B.diagonal(), 1.0, atol=0.5)


def test_equilibrate_extreme_diagonal():
    A = sp.csr_matrix(np.diag([1e6, 1e-6]))
    _, _, B = linalg.equilibrate(A)
    assert np.allclose(np.abs(B.diagonal()), 1.0)


def test_equilibrate_random_sparse_norms():
    rng = np.random.default_rng(4)
    A = sp.random(80, 80, density=0.1, random_state=4, format="csr")
    A = A + sp.diags(1.0 + rng.random(80))
    r, c, B = linalg.equilibrate(A)
    absB = abs(B)
    rmax = np.asarray(absB.max(axis=1).todense()).ravel()
    cmax = np.asarray(absB.max(axis=0).todense()).ravel()
    assert rmax.min() >= 0.5 and rmax.max() <= 2.0
    assert cmax.min() >= 0.5 and cmax.max() <= 2.0
    # un-scaling recovers A
    Arec = sp.diags(1.0 / r) @ B @ sp.diags(1.0 / c)
    assert abs(Arec - A).max() <= 1e-12 * abs(A).max()


def test_equilibrate_zero_row():
    A = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        linalg.equilibrate(A)


def test_precond_block_diagonal_exact():
    d1 = np.array([2.0, 4.0])
    d2 = np.array([5.0])
    B = sp.csr_matrix(np.diag(np.concatenate([d1, d2])))
    pre = linalg.build_precond(B, (2, 1))
    assert np.allclose(pre.inv_diag, 1.0 / np.concatenate([d1, d2]))
    x, iters, _ = linalg.gmres(B, np.ones(3), tol=1e-12, precond=pre)
    assert iters == 1


def test_precond_no_coupling():
    # A21 = 0 -> Shat = diag(A22)
    A = np.array([[3.0, 0.0, 1.0], [0.0, 2.0, 0.5], [0.0, 0.0, 7.0]])
    pre = linalg.build_precond(sp.csr_matrix(A), (2, 1))
    assert np.allclose(pre.inv_diag, [1 / 3.0, 1 / 2.0, 1 / 7.0])


def test_precond_matches_dense_schur():
    rng = np.random.default_rng(5)
    N, Nb = 7, 4
    A = rng.random((N + Nb, N + Nb)) + np.diag(2.0 + rng.random(N + Nb))
    pre = linalg.build_precond(sp.csr_matrix(A), (N, Nb))
    A11d = np.diag(np.diag(A[:N, :N]))
    S = A[N:, N:] - A[N:, :N] @ np.linalg.inv(A11d) @ A[:N, N:]
    expected = np.concatenate([np.diag(A[:N, :N]), np.diag(S)])
    assert np.allclose(1.0 / pre.inv_diag, expected)


def test_precond_is_linear():
    pre = linalg.SaddlePrecond(inv_diag=np.array([0.5, 2.0, 4.0]))
    u = np.array([1.0, 2.0, 3.0])
    v = np.array([-1.0, 0.5, 2.0])
    assert np.array_equal(pre.apply(u + v), pre.apply(u) + pre.apply(v))


def test_eig_diag():
    vals = linalg.eig_dense(np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(sorted(vals.real), [1, 2, 3])
    assert np.allclose(vals.imag, 0)


def test_eig_rotation():
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    vals = linalg.eig_dense(R)
    assert np.allclose(sorted(vals.imag), sorted([np.sin(th), -np.sin(th)]))


def test_eig_trace_and_residual():
    rng = np.random.default_rng(6)
    A = rng.random((100, 100))
    vals = linalg.eig_dense(A)
    scale = np.abs(A).sum(axis=0).max()
    assert abs(vals.sum().real - np.trace(A)) <= 1e-6 * scale
    # spot-check residuals via inverse iteration on a few eigenvalues
    for lam in vals[:3]:
        M = A - (lam + 1e-8) * np.eye(100)
        v = np.linalg.solve(M.astype(complex), np.ones(100, dtype=complex))
        v /= np.linalg.norm(v)
        assert np.linalg.norm(A @ v - lam * v) <= 1e-6 * scale


def test_eig_size_cap():
    with pytest.raises(ValueError):
        linalg.eig_dense(np.eye(1501))
