import numpy as np
import pytest

from overlapfd import operators, semilag
from overlapfd.params import OperatorKind, build_spec


def test_zero_velocity_identity():
    pts = np.random.default_rng(0).random((20, 2))
    dep = semilag.back_trace(pts, lambda x, t: np.zeros_like(x), 0.5, 0.4, 0.1)
    assert np.array_equal(dep, pts)


def test_constant_velocity_exact():
    pts = np.random.default_rng(1).random((10, 2))
    u = lambda x, t: np.tile([[0.3, -0.2]], (len(x), 1))
    dep = semilag.back_trace(pts, u, 0.5, 0.4, 0.1)
    assert np.allclose(dep, pts - 0.1 * np.array([0.3, -0.2]), atol=1e-15)


def test_rotation_fourth_order():
    omega = 1.3

    def u(x, t):
        return omega * np.column_stack([x[:, 1], -x[:, 0]])

    def rotate(x, a):
        R = np.array([[np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]])
        return x @ R.T

    pts = np.array([[0.5, 0.0], [0.0, 0.7], [0.3, 0.3]])
    errs = []
    for dt in (0.1, 0.05):
        dep = semilag.back_trace(pts, u, dt, 0.0, dt)
        exact = rotate(pts, -omega * dt)  # backward along the flow
        errs.append(np.abs(dep - exact).max())
        # radius preserved to the same order
        assert np.allclose(np.hypot(dep[:, 0], dep[:, 1]),
                           np.hypot(pts[:, 0], pts[:, 1]), atol=10 * errs[-1])
    assert errs[1] <= errs[0] / 12.0  # ~2^4 for an O(dt^4) one-step error


def test_multi_step_chaining():
    u = lambda x, t: np.tile([[1.0, 0.0]], (len(x), 1))
    pts = np.zeros((1, 2))
    dep = semilag.back_trace(pts, u, 0.6, 0.0, 0.2)  # 3 chained steps
    assert np.allclose(dep, [[-0.6, 0.0]], atol=1e-14)


def test_near_involution():
    def u(x, t):
        amp = np.sin(np.pi * (x[:, 0] ** 2 + x[:, 1] ** 2)) * np.sin(np.pi * (t + 0.4))
        return np.column_stack([amp * x[:, 1], -amp * x[:, 0]])

    rng = np.random.default_rng(2)
    pts = rng.random((50, 2)) * 0.8 - 0.4
    dt = 0.02
    dep = semilag.back_trace(pts, u, 0.3, 0.3 - dt, dt)
    back = semilag.rk3_step(u, dep, 0.3 - dt, dt)
    umax = np.abs(u(pts, 0.3)).max()
    assert np.abs(back - pts).max() <= 1e-3 * dt * max(umax, 1e-3)


def test_back_trace_requires_past_target():
    with pytest.raises(ValueError):
        semilag.back_trace(np.zeros((1, 2)), lambda x, t: x, 0.1, 0.2, 0.1)


@pytest.fixture(scope="module")
def bundle_and_nodes(request):
    from overlapfd import geometry

    ref = geometry.generate_reference_nodes(0.09, seed=0)
    nodes = geometry.adapt_nodes(ref, geometry.DomainModel(embedded=[], t=0.0))
    spec = build_spec(OperatorKind.POINT_EVALUATION, 2)
    bundle = operators.build_interp_bundle(nodes, spec)
    return bundle, nodes


def test_reconstruct_constant(bundle_and_nodes):
    bundle, _ = bundle_and_nodes
    X = bundle.node_coords
    vals = np.full(len(X), 5.0)
    dep = X + 0.001
    out = semilag.reconstruct([(bundle, vals)], [dep])
    assert np.abs(out.values[0] - 5.0).max() <= 1e-10


def test_reconstruct_identity_departures(bundle_and_nodes):
    bundle, _ = bundle_and_nodes
    X = bundle.node_coords
    vals = np.sin(X[:, 0] * 3 + X[:, 1])
    out = semilag.reconstruct([(bundle, vals)], [X.copy()])
    assert np.abs(out.values[0] - vals).max() <= 1e-9


def test_reconstruct_linear_exact(bundle_and_nodes):
    bundle, _ = bundle_and_nodes
    X = bundle.node_coords
    vals = X[:, 0] + 2 * X[:, 1]
    dep = X - 0.01  # constant shift, like a constant-velocity trace
    out = semilag.reconstruct([(bundle, vals)], [dep])
    assert np.abs(out.values[0] - (dep[:, 0] + 2 * dep[:, 1])).max() <= 1e-9


def test_reconstruct_three_levels(bundle_and_nodes):
    bundle, _ = bundle_and_nodes
    X = bundle.node_coords
    history = [(bundle, np.full(len(X), float(k))) for k in range(3)]
    deps = [X + 0.001 * k for k in range(3)]
    out = semilag.reconstruct(history, deps)
    for k in range(3):
        assert np.abs(out.values[k] - k).max() <= 1e-9


def test_reconstruction_convergence_order():
    """Interpolation error decays ~ h^(ell_I+1) on refining node sets."""
    from overlapfd import geometry

    spec = build_spec(OperatorKind.POINT_EVALUATION, 2)  # ell_I = 2
    f = lambda p: np.sin(2.1 * p[:, 0]) * np.cos(1.7 * p[:, 1])
    rng = np.random.default_rng(5)
    q = rng.random((400, 2)) * 1.0 - 0.5
    errs, hs = [], []
    for h in (0.16, 0.08, 0.04):
        ref = geometry.generate_reference_nodes(h, seed=0)
        nodes = geometry.adapt_nodes(ref, geometry.DomainModel(embedded=[], t=0.0))
        bundle = operators.build_interp_bundle(nodes, spec)
        out = operators.interp_eval(bundle, f(bundle.node_coords), q)
        errs.append(np.abs(out - f(q)).max())
        hs.append(h)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= spec.ell + 0.5
