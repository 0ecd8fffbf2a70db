import numpy as np
import pytest

from overlapfd import weights as W
from overlapfd.params import OperatorKind, build_spec


def random_stencil(rng, n, scale=0.2):
    return rng.random((n, 2)) * scale


def full_solve(coords, spec, op_data=None, evals=None):
    system = W.assemble_local(coords, spec)
    pts = coords if evals is None else evals
    system.rhs_A, system.rhs_Psi = W.operator_rhs(coords, pts, spec, op_data)
    return W.solve_weights(system)


def poly_eval(cf, x):
    out = np.zeros(len(x))
    deg = len(cf) - 1
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            out += cf[a][b] * x[:, 0] ** a * x[:, 1] ** b
    return out


def poly_lap(cf, x):
    out = np.zeros(len(x))
    deg = len(cf) - 1
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            if a >= 2:
                out += cf[a][b] * a * (a - 1) * x[:, 0] ** (a - 2) * x[:, 1] ** b
            if b >= 2:
                out += cf[a][b] * b * (b - 1) * x[:, 0] ** a * x[:, 1] ** (b - 2)
    return out


def poly_grad(cf, x):
    gx = np.zeros(len(x))
    gy = np.zeros(len(x))
    deg = len(cf) - 1
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            if a >= 1:
                gx += cf[a][b] * a * x[:, 0] ** (a - 1) * x[:, 1] ** b
            if b >= 1:
                gy += cf[a][b] * b * x[:, 0] ** a * x[:, 1] ** (b - 1)
    return gx, gy


def test_assemble_local_structure():
    rng = np.random.default_rng(0)
    spec = build_spec(OperatorKind.LAPLACIAN, 2)
    coords = random_stencil(rng, spec.n)
    system = W.assemble_local(coords, spec)
    assert np.array_equal(system.A, system.A.T)
    assert np.all(np.diag(system.A) == 0.0)
    assert np.allclose(system.Psi[:, 0], 1.0)


def test_coincident_points_error():
    spec = build_spec(OperatorKind.LAPLACIAN, 2)
    coords = np.random.default_rng(0).random((spec.n, 2))
    coords[5] = coords[11]
    with pytest.raises(W.StencilGeometryError):
        W.assemble_local(coords, spec)


def test_rank_deficient_psi_error():
    # collinear points cannot support a full bivariate basis
    spec = build_spec(OperatorKind.LAPLACIAN, 2)
    t = np.linspace(0, 1, spec.n)
    coords = np.column_stack([t, 2 * t])
    with pytest.raises(W.StencilGeometryError, match="centered at"):
        W.assemble_local(coords, spec)


def test_scaled_basis_columns():
    # ell=1 basis in hat coordinates is {1, xhat, yhat}
    from overlapfd import kernels

    rng = np.random.default_rng(1)
    pts_hat = rng.random((6, 2)) * 2 - 1
    pairs = kernels.poly_index_pairs(1)
    P = kernels.poly_design(np.ascontiguousarray(pts_hat), 1, pairs)
    assert np.allclose(P[:, 0], 1.0)
    assert np.allclose(P[:, 1], pts_hat[:, 0])
    assert np.allclose(P[:, 2], pts_hat[:, 1])


def test_laplacian_of_phs_value():
    from overlapfd import kernels

    v = kernels.phs_laplacian_rhs(np.array([[0.0, 0.0]]), np.array([[2.0, 0.0]]), 3)
    assert np.isclose(v[0, 0], 18.0)


def test_point_eval_rhs_identity():
    rng = np.random.default_rng(2)
    spec = build_spec(OperatorKind.POINT_EVALUATION, 2)
    coords = random_stencil(rng, spec.n)
    system = W.assemble_local(coords, spec)
    rhs_A, rhs_Psi = W.operator_rhs(coords, coords[7][None, :], spec)
    assert np.allclose(rhs_A[:, 0], system.A[:, 7])
    assert np.allclose(rhs_Psi[:, 0], system.Psi[7, :])


def test_robin_degenerates_to_point_eval():
    rng = np.random.default_rng(3)
    spec_r = build_spec(OperatorKind.BOUNDARY_ROBIN, 2)
    coords = random_stencil(rng, spec_r.n)
    evals = coords[:5]
    data = W.RobinData(alpha=np.zeros(5), beta=np.ones(5),
                       normals=np.tile([[1.0, 0.0]], (5, 1)))
    rhs_A, rhs_Psi = W.operator_rhs(coords, evals, spec_r, data)
    spec_p = build_spec(OperatorKind.POINT_EVALUATION, 2)
    rhs_A2, rhs_Psi2 = W.operator_rhs(coords, evals, spec_p)
    assert np.allclose(rhs_A, rhs_A2)
    assert np.allclose(rhs_Psi, rhs_Psi2)


@pytest.mark.parametrize("xi", [2, 4, 6])
@pytest.mark.parametrize("kind", list(OperatorKind))
def test_polynomial_exactness(kind, xi):
    rng = np.random.default_rng(xi * 10 + kind.value)
    spec = build_spec(kind, xi)
    for trial in range(50):
        coords = random_stencil(rng, spec.n, scale=0.15) + rng.random(2)
        if kind is OperatorKind.BOUNDARY_ROBIN:
            nrm = rng.standard_normal((spec.n, 2))
            nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
            data = W.RobinData(alpha=rng.random(spec.n) - 0.5,
                               beta=rng.random(spec.n) - 0.5, normals=nrm)
        else:
            data = None
        try:
            system = full_solve(coords, spec, data)
        except W.StencilGeometryError:
            continue
        cf = [[rng.random() for _ in range(spec.ell + 1)]
              for _ in range(spec.ell + 1)]
        vals = poly_eval(cf, coords)
        approx = system.W.T @ vals
        if kind is OperatorKind.LAPLACIAN:
            exact = poly_lap(cf, coords)
        elif kind is OperatorKind.POINT_EVALUATION:
            exact = poly_eval(cf, coords)
        else:
            gx, gy = poly_grad(cf, coords)
            exact = data.alpha * (data.normals[:, 0] * gx + data.normals[:, 1] * gy) \
                + data.beta * poly_eval(cf, coords)
        err = np.abs(approx - exact) / np.maximum(1.0, np.abs(exact))
        assert err.max() <= 1e-8


@pytest.mark.parametrize("xi", [2, 4])
def test_kernel_exactness_block_residual(xi):
    rng = np.random.default_rng(xi)
    spec = build_spec(OperatorKind.LAPLACIAN, xi)
    for _ in range(10):
        coords = random_stencil(rng, spec.n)
        system = full_solve(coords, spec)
        resid = system.A @ system.W + system.Psi @ system.Wpsi - system.rhs_A
        err = np.abs(resid) / np.maximum(1.0, np.abs(system.rhs_A))
        assert err.max() <= 1e-8


def test_laplacian_row_sums_vanish():
    rng = np.random.default_rng(5)
    spec = build_spec(OperatorKind.LAPLACIAN, 4)
    coords = random_stencil(rng, spec.n)
    system = full_solve(coords, spec)
    sums = np.abs(system.W.sum(axis=0))
    assert np.all(sums <= 1e-9 * np.abs(system.W).sum(axis=0))


def test_weights_match_extended_precision_oracle():
    """21-node xi=2 Laplacian stencil vs a 50-digit mpmath solve."""
    import mpmath

    from overlapfd import kernels

    rng = np.random.default_rng(42)
    spec = build_spec(OperatorKind.LAPLACIAN, 2)
    coords = random_stencil(rng, spec.n)
    system = full_solve(coords, spec, evals=coords[:1])
    got = system.W[:, 0]

    mpmath.mp.dps = 50
    n, M, m = spec.n, spec.M, spec.m
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    ctr, hw = (lo + hi) / 2, (hi - lo) / 2
    pairs = kernels.poly_index_pairs(spec.ell)

    def legv(x, k):
        # Legendre P_k and P_k'' via mpmath's hypergeometric representation
        return mpmath.legendre(k, x)

    def legd2(x, k):
        h = mpmath.mpf(1) / 10**10
        return (legv(x + h, k) - 2 * legv(x, k) + legv(x - h, k)) / h**2

    K = mpmath.zeros(n + M, n + M)
    for i in range(n):
        for j in range(n):
            r2 = (mpmath.mpf(coords[i, 0]) - mpmath.mpf(coords[j, 0])) ** 2 \
                + (mpmath.mpf(coords[i, 1]) - mpmath.mpf(coords[j, 1])) ** 2
            K[i, j] = mpmath.sqrt(r2) ** m
    for i in range(n):
        xh = (mpmath.mpf(coords[i, 0]) - mpmath.mpf(ctr[0])) / mpmath.mpf(hw[0])
        yh = (mpmath.mpf(coords[i, 1]) - mpmath.mpf(ctr[1])) / mpmath.mpf(hw[1])
        for q, (a, b) in enumerate(pairs):
            K[i, n + q] = legv(xh, int(a)) * legv(yh, int(b))
            K[n + q, i] = K[i, n + q]
    y = coords[0]
    rhs = mpmath.zeros(n + M, 1)
    for i in range(n):
        r2 = (mpmath.mpf(y[0]) - mpmath.mpf(coords[i, 0])) ** 2 \
            + (mpmath.mpf(y[1]) - mpmath.mpf(coords[i, 1])) ** 2
        rhs[i] = m**2 * mpmath.sqrt(r2) ** (m - 2)
    sx = 1 / mpmath.mpf(hw[0])
    sy = 1 / mpmath.mpf(hw[1])
    xh = (mpmath.mpf(y[0]) - mpmath.mpf(ctr[0])) * sx
    yh = (mpmath.mpf(y[1]) - mpmath.mpf(ctr[1])) * sy
    for q, (a, b) in enumerate(pairs):
        rhs[n + q] = sx**2 * legd2(xh, int(a)) * legv(yh, int(b)) \
            + sy**2 * legv(xh, int(a)) * legd2(yh, int(b))
    sol = mpmath.lu_solve(K, rhs)
    oracle = np.array([float(sol[i]) for i in range(n)])
    scale = np.abs(oracle).max()
    assert np.abs(got - oracle).max() <= 1e-8 * scale


def test_scale_covariance():
    rng = np.random.default_rng(7)
    for kind, power in [(OperatorKind.LAPLACIAN, -2.0),
                        (OperatorKind.POINT_EVALUATION, 0.0)]:
        spec = build_spec(kind, 2)
        coords = random_stencil(rng, spec.n)
        w1 = full_solve(coords, spec, evals=coords[:1]).W[:, 0]
        s = 3.7
        w2 = full_solve(s * coords, spec, evals=s * coords[:1]).W[:, 0]
        assert np.allclose(w2, w1 * s**power, rtol=1e-8, atol=1e-12)


def test_indicators_point_eval_cardinal():
    rng = np.random.default_rng(8)
    spec = build_spec(OperatorKind.POINT_EVALUATION, 2)
    coords = random_stencil(rng, spec.n)
    system = full_solve(coords, spec)
    ind = W.indicators(system)
    assert np.allclose(system.W, np.eye(spec.n), atol=1e-8)
    assert np.allclose(ind.lebesgue, 1.0, atol=1e-7)
    assert ind.accepted[0]


def test_indicators_match_bruteforce():
    rng = np.random.default_rng(9)
    spec = build_spec(OperatorKind.LAPLACIAN, 2)
    coords = random_stencil(rng, spec.n)
    system = full_solve(coords, spec)
    ind = W.indicators(system)
    # direct recomputation of both inequalities
    leb = np.array([np.abs(system.W[:, j]).sum() for j in range(spec.n)])
    osc = np.array([abs(system.W[:, j] @ system.rhs_A[:, j]
                        + system.Wpsi[:, j] @ system.rhs_Psi[:, j])
                    for j in range(spec.n)])
    assert np.array_equal(ind.lebesgue, leb)
    assert np.allclose(ind.oscillation, osc, rtol=1e-12, atol=0)
    assert np.array_equal(ind.accepted, (leb <= leb[0]) & (osc <= osc[0]))
    assert ind.accepted[0]


@pytest.mark.parametrize("w,expected", [
    ((-4.0, 1.0, 1.0, 1.0, 1.0), True),
    ((-10.0, 1.0, 1.0), False),
    ((0.0, 0.0, 0.0), True),
])
def test_center_condition(w, expected):
    assert W.center_condition(np.array(w)) is expected
