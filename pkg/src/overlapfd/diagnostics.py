"""Stability studies and convergence/timing harnesses.

Reproduces the comparative experiments behind the scaling-law choice:
spectra of the assembled Laplacian under each candidate law, per-node
Lebesgue maps on Halton points, plus the convergence and wall-clock
sweeps for the full solver. All spectrum conclusions are comparative
(ratios and orderings); absolute eigenvalues depend on the node set.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from . import geometry, operators, timestepper, weights
from .linalg import eig_dense
from .params import (OperatorKind, OperatorSpec, ScalingLaw, build_spec,
                     phs_degree_alt)
from .stencils import KdTree, make_stencil


def _law_spec(ell: int, law: ScalingLaw) -> OperatorSpec:
    M = (ell + 2) * (ell + 1) // 2
    return OperatorSpec(kind=OperatorKind.LAPLACIAN, xi=max(ell - 1, 1), ell=ell,
                        m=phs_degree_alt(ell, law), n=2 * M + 1, M=M)


def disk_nodes(n_target: int, seed: int = 0) -> np.ndarray:
    """Poisson-disk samples of the unit disk (interior + circle boundary)."""
    h = geometry.h_for_target(n_target)
    nodes = geometry.generate_reference_nodes(h, seed)
    idx = np.concatenate([nodes.interior_idx, nodes.boundary_idx])
    return np.ascontiguousarray(nodes.coords[idx])


def halton_square(n: int, bases=(2, 3)) -> np.ndarray:
    """First n Halton points (indices 1..n) mapped to [-1, 1]^2."""
    out = np.empty((n, 2))
    for dim, b in enumerate(bases):
        idx = np.arange(1, n + 1)
        res = np.zeros(n)
        denom = 1.0
        i = idx.copy()
        while np.any(i > 0):
            denom *= b
            res += (i % b) / denom
            i //= b
        out[:, dim] = res
    return 2.0 * out - 1.0


def halton_nodes_with_boundary(n: int, h_boundary: float = None) -> np.ndarray:
    """Halton interior points plus evenly spaced points on the square edge."""
    pts = halton_square(n)
    if h_boundary is None:
        h_boundary = 2.0 / int(np.sqrt(n))
    per_side = int(round(2.0 / h_boundary))
    t = np.linspace(-1.0, 1.0, per_side, endpoint=False)
    edge = np.vstack([
        np.column_stack([t, np.full_like(t, -1.0)]),
        np.column_stack([np.full_like(t, 1.0), t]),
        np.column_stack([-t, np.full_like(t, 1.0)]),
        np.column_stack([np.full_like(t, -1.0), -t]),
    ])
    # keep interior points away from the boundary layer
    keep = np.max(np.abs(pts), axis=1) < 1.0 - 0.25 * h_boundary
    return np.ascontiguousarray(np.vstack([pts[keep], edge]))


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    max_real: float
    N: int
    N_s: int


def spectrum_study(points: np.ndarray, ell: int, law: ScalingLaw) -> SpectrumResult:
    """Dense spectrum of the assembled Laplacian under a scaling law."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    N = points.shape[0]
    if N > 1500:
        raise ValueError(f"spectrum study capped at 1500 nodes, got {N}")
    spec = _law_spec(ell, law)
    L, stats = operators.assemble_points(points, np.arange(N, dtype=np.int64), spec)
    vals = eig_dense(L.mat.toarray())
    scale = max(1.0, float(np.abs(L.mat).sum(axis=1).max()))
    if abs(vals.sum().real - L.mat.diagonal().sum()) > 1e-6 * scale:
        raise ArithmeticError("spectrum/trace mismatch")
    return SpectrumResult(eigenvalues=vals, max_real=float(vals.real.max()),
                          N=N, N_s=stats.N_s)


def lebesgue_map(points: np.ndarray, ell: int, law: ScalingLaw) -> np.ndarray:
    """Per-node Laplacian Lebesgue values, each from its own center stencil."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    spec = _law_spec(ell, law)
    tree = KdTree(points)
    N = points.shape[0]
    out = np.empty(N)
    for k in range(N):
        st = make_stencil(tree, k, spec.n, points)
        coords = points[st.neighbors_global]
        system = weights.assemble_local(coords, spec)
        system.rhs_A, system.rhs_Psi = weights.operator_rhs(coords, coords[:1], spec)
        weights.solve_weights(system)
        out[k] = np.abs(system.W[:, 0]).sum()
    return out


def convergence_run(problem, xi_list, n_list, seed: int = 0):
    """Full solves per (xi, N); returns rows of (N, xi, error, avg iters)."""
    rows = []
    for xi in xi_list:
        for n_target in n_list:
            h = geometry.h_for_target(n_target)
            res = timestepper.run(problem, xi=xi, h=h, seed=seed)
            rows.append({"N": res.n_final, "xi": xi, "error": res.error,
                         "iters": res.avg_gmres_iters})
    return rows


def fit_loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)),
                            np.log(np.asarray(y, dtype=float)), 1)[0])


def timing_run(problem, xi: int, n_list, seed: int = 0):
    """Wall-clock per phase per N, plus fitted log-log slopes vs N."""
    rows = []
    for n_target in n_list:
        h = geometry.h_for_target(n_target)
        res = timestepper.run(problem, xi=xi, h=h, seed=seed)
        rows.append({"N": res.n_final, "preprocess_ms": res.preprocess_ms,
                     "step_ms": res.avg_step_ms})
    Ns = [r["N"] for r in rows]
    slopes = {
        "preprocess": fit_loglog_slope(Ns, [r["preprocess_ms"] for r in rows]),
        "step": fit_loglog_slope(Ns, [r["step_ms"] for r in rows]),
    }
    return rows, slopes


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
