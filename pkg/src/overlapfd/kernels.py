"""Hot numeric kernels: PHS kernel fills and scaled Legendre bases.

Every kernel has a numba ``@njit`` build and a vectorized numpy fallback
with identical semantics; :mod:`overlapfd.accel` decides which one is bound
to the public name. The numpy variants stay importable under ``*_numpy``
names for the benchmark suite.
"""

from __future__ import annotations

import numpy as np

from .accel import USE_NUMBA, njit


# ----------------------------------------------------------------------
# Legendre tables (values, first and second derivatives, degrees 0..ell)
# ----------------------------------------------------------------------

def _legendre_tables_numpy(x, ell):
    q = x.shape[0]
    V = np.empty((q, ell + 1))
    D1 = np.zeros((q, ell + 1))
    D2 = np.zeros((q, ell + 1))
    V[:, 0] = 1.0
    if ell >= 1:
        V[:, 1] = x
        D1[:, 1] = 1.0
    for k in range(1, ell):
        V[:, k + 1] = ((2 * k + 1) * x * V[:, k] - k * V[:, k - 1]) / (k + 1)
        D1[:, k + 1] = D1[:, k - 1] + (2 * k + 1) * V[:, k]
        D2[:, k + 1] = D2[:, k - 1] + (2 * k + 1) * D1[:, k]
    return V, D1, D2


def _legendre_tables_loops(x, ell):
    q = x.shape[0]
    V = np.empty((q, ell + 1))
    D1 = np.zeros((q, ell + 1))
    D2 = np.zeros((q, ell + 1))
    for i in range(q):
        V[i, 0] = 1.0
    if ell >= 1:
        for i in range(q):
            V[i, 1] = x[i]
            D1[i, 1] = 1.0
    for k in range(1, ell):
        a = 2.0 * k + 1.0
        for i in range(q):
            V[i, k + 1] = (a * x[i] * V[i, k] - k * V[i, k - 1]) / (k + 1.0)
            D1[i, k + 1] = D1[i, k - 1] + a * V[i, k]
            D2[i, k + 1] = D2[i, k - 1] + a * D1[i, k]
    return V, D1, D2


# the jitted poly kernels below resolve this global at compile time
_leg_tables = njit(cache=True)(_legendre_tables_loops) if USE_NUMBA else _legendre_tables_loops


def poly_index_pairs(ell: int) -> np.ndarray:
    """(M, 2) exponent pairs (a, b) in graded order, a descending per degree.

    Column q of a design matrix is P_a(xhat) * P_b(yhat) with (a, b) =
    row q of this table. Degree-0 first, so column 0 is the constant.
    """
    pairs = []
    for t in range(ell + 1):
        for a in range(t, -1, -1):
            pairs.append((a, t - a))
    return np.asarray(pairs, dtype=np.int64)


def _poly_design_numpy(pts_hat, ell, pairs):
    Vx, _, _ = _legendre_tables_numpy(pts_hat[:, 0], ell)
    Vy, _, _ = _legendre_tables_numpy(pts_hat[:, 1], ell)
    return Vx[:, pairs[:, 0]] * Vy[:, pairs[:, 1]]


def _poly_design_loops(pts_hat, ell, pairs):
    Vx, _, _ = _leg_tables(pts_hat[:, 0], ell)
    Vy, _, _ = _leg_tables(pts_hat[:, 1], ell)
    q = pts_hat.shape[0]
    M = pairs.shape[0]
    out = np.empty((q, M))
    for j in range(M):
        a = pairs[j, 0]
        b = pairs[j, 1]
        for i in range(q):
            out[i, j] = Vx[i, a] * Vy[i, b]
    return out


def _poly_laplacian_numpy(pts_hat, ell, pairs, sx, sy):
    Vx, _, D2x = _legendre_tables_numpy(pts_hat[:, 0], ell)
    Vy, _, D2y = _legendre_tables_numpy(pts_hat[:, 1], ell)
    a, b = pairs[:, 0], pairs[:, 1]
    return sx * sx * D2x[:, a] * Vy[:, b] + sy * sy * Vx[:, a] * D2y[:, b]


def _poly_laplacian_loops(pts_hat, ell, pairs, sx, sy):
    Vx, _, D2x = _leg_tables(pts_hat[:, 0], ell)
    Vy, _, D2y = _leg_tables(pts_hat[:, 1], ell)
    q = pts_hat.shape[0]
    M = pairs.shape[0]
    out = np.empty((q, M))
    sx2 = sx * sx
    sy2 = sy * sy
    for j in range(M):
        a = pairs[j, 0]
        b = pairs[j, 1]
        for i in range(q):
            out[i, j] = sx2 * D2x[i, a] * Vy[i, b] + sy2 * Vx[i, a] * D2y[i, b]
    return out


def _poly_robin_numpy(pts_hat, ell, pairs, sx, sy, alpha, beta, normals):
    Vx, D1x, _ = _legendre_tables_numpy(pts_hat[:, 0], ell)
    Vy, D1y, _ = _legendre_tables_numpy(pts_hat[:, 1], ell)
    a, b = pairs[:, 0], pairs[:, 1]
    gx = sx * D1x[:, a] * Vy[:, b]
    gy = sy * Vx[:, a] * D1y[:, b]
    val = Vx[:, a] * Vy[:, b]
    ndot = normals[:, 0:1] * gx + normals[:, 1:2] * gy
    return alpha[:, None] * ndot + beta[:, None] * val


def _poly_robin_loops(pts_hat, ell, pairs, sx, sy, alpha, beta, normals):
    Vx, D1x, _ = _leg_tables(pts_hat[:, 0], ell)
    Vy, D1y, _ = _leg_tables(pts_hat[:, 1], ell)
    q = pts_hat.shape[0]
    M = pairs.shape[0]
    out = np.empty((q, M))
    for j in range(M):
        a = pairs[j, 0]
        b = pairs[j, 1]
        for i in range(q):
            gx = sx * D1x[i, a] * Vy[i, b]
            gy = sy * Vx[i, a] * D1y[i, b]
            ndot = normals[i, 0] * gx + normals[i, 1] * gy
            out[i, j] = alpha[i] * ndot + beta[i] * Vx[i, a] * Vy[i, b]
    return out


# ----------------------------------------------------------------------
# PHS kernel fills
# ----------------------------------------------------------------------

def _phs_matrix_numpy(coords, m):
    d = coords[:, None, :] - coords[None, :, :]
    r = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
    return r**m


def _phs_matrix_loops(coords, m):
    n = coords.shape[0]
    A = np.empty((n, n))
    for i in range(n):
        A[i, i] = 0.0
        for j in range(i + 1, n):
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            v = np.sqrt(dx * dx + dy * dy) ** m
            A[i, j] = v
            A[j, i] = v
    return A


def _phs_point_rhs_numpy(coords, evals, m):
    d = coords[:, None, :] - evals[None, :, :]
    r = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
    return r**m


def _phs_point_rhs_loops(coords, evals, m):
    n = coords.shape[0]
    p = evals.shape[0]
    out = np.empty((n, p))
    for i in range(n):
        for j in range(p):
            dx = coords[i, 0] - evals[j, 0]
            dy = coords[i, 1] - evals[j, 1]
            out[i, j] = np.sqrt(dx * dx + dy * dy) ** m
    return out


def _phs_laplacian_rhs_numpy(coords, evals, m):
    d = coords[:, None, :] - evals[None, :, :]
    r = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
    return float(m * m) * r ** (m - 2)


def _phs_laplacian_rhs_loops(coords, evals, m):
    n = coords.shape[0]
    p = evals.shape[0]
    out = np.empty((n, p))
    mm = float(m * m)
    for i in range(n):
        for j in range(p):
            dx = coords[i, 0] - evals[j, 0]
            dy = coords[i, 1] - evals[j, 1]
            out[i, j] = mm * np.sqrt(dx * dx + dy * dy) ** (m - 2)
    return out


def _phs_robin_rhs_numpy(coords, evals, m, alpha, beta, normals):
    d = evals[None, :, :] - coords[:, None, :]
    r = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
    rm2 = r ** (m - 2)
    ndot = d[..., 0] * normals[None, :, 0] + d[..., 1] * normals[None, :, 1]
    return alpha[None, :] * m * rm2 * ndot + beta[None, :] * rm2 * r * r


def _phs_robin_rhs_loops(coords, evals, m, alpha, beta, normals):
    n = coords.shape[0]
    p = evals.shape[0]
    out = np.empty((n, p))
    for i in range(n):
        for j in range(p):
            dx = evals[j, 0] - coords[i, 0]
            dy = evals[j, 1] - coords[i, 1]
            r = np.sqrt(dx * dx + dy * dy)
            rm2 = r ** (m - 2)
            ndot = dx * normals[j, 0] + dy * normals[j, 1]
            out[i, j] = alpha[j] * m * rm2 * ndot + beta[j] * rm2 * r * r
    return out


# ----------------------------------------------------------------------
# Poisson-disk dart acceptance over a background grid
# ----------------------------------------------------------------------

def _poisson_accept_py(cand, rmin, rmax_domain, origin, cell, ncell, grid, pts, count):
    r2 = rmin * rmin
    for q in range(cand.shape[0]):
        x = cand[q, 0]
        y = cand[q, 1]
        if x * x + y * y > rmax_domain * rmax_domain:
            continue
        ci = int((x - origin) / cell)
        cj = int((y - origin) / cell)
        ok = True
        for ii in range(max(0, ci - 2), min(ncell, ci + 3)):
            for jj in range(max(0, cj - 2), min(ncell, cj + 3)):
                k = grid[ii, jj]
                if k >= 0:
                    dx = pts[k, 0] - x
                    dy = pts[k, 1] - y
                    if dx * dx + dy * dy < r2:
                        ok = False
                        break
            if not ok:
                break
        if ok and count < pts.shape[0]:
            pts[count, 0] = x
            pts[count, 1] = y
            grid[ci, cj] = count
            count += 1
    return count


if USE_NUMBA:
    legendre_tables = _leg_tables
    poly_design = njit(cache=True)(_poly_design_loops)
    poly_laplacian = njit(cache=True)(_poly_laplacian_loops)
    poly_robin = njit(cache=True)(_poly_robin_loops)
    phs_matrix = njit(cache=True)(_phs_matrix_loops)
    phs_point_rhs = njit(cache=True)(_phs_point_rhs_loops)
    phs_laplacian_rhs = njit(cache=True)(_phs_laplacian_rhs_loops)
    phs_robin_rhs = njit(cache=True)(_phs_robin_rhs_loops)
    poisson_accept = njit(cache=True)(_poisson_accept_py)
else:
    legendre_tables = _legendre_tables_numpy
    poly_design = _poly_design_numpy
    poly_laplacian = _poly_laplacian_numpy
    poly_robin = _poly_robin_numpy
    phs_matrix = _phs_matrix_numpy
    phs_point_rhs = _phs_point_rhs_numpy
    phs_laplacian_rhs = _phs_laplacian_rhs_numpy
    phs_robin_rhs = _phs_robin_rhs_numpy
    poisson_accept = _poisson_accept_py

# numpy reference paths, always importable (used by tests and benchmarks)
legendre_tables_numpy = _legendre_tables_numpy
poly_design_numpy = _poly_design_numpy
poly_laplacian_numpy = _poly_laplacian_numpy
poly_robin_numpy = _poly_robin_numpy
phs_matrix_numpy = _phs_matrix_numpy
phs_point_rhs_numpy = _phs_point_rhs_numpy
phs_laplacian_rhs_numpy = _phs_laplacian_rhs_numpy
phs_robin_rhs_numpy = _phs_robin_rhs_numpy
poisson_accept_numpy = _poisson_accept_py
