"""Augmented PHS RBF-FD weights and the two stability indicators.

For a stencil of n points the local saddle system

    [ A   Psi ] [ W    ]   [ rhs_A   ]
    [ Psi^T 0 ] [ Wpsi ] = [ rhs_Psi ]

is factored once and solved for one weight column per candidate point.
``A`` is the PHS kernel matrix ``|x_i - x_j|^m`` and ``Psi`` holds products
of Legendre polynomials in coordinates affinely mapped from the stencil
bounding box onto [-1, 1]^2.

Each candidate's weight column is scored by the operator Lebesgue function
(its l1 norm) and by an oscillation indicator (the magnitude of the
quadratic form of the weight/multiplier vector against the saddle matrix);
a candidate is accepted when neither score exceeds the stencil center's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import kernels
from .linalg import lu_factor, lu_solve
from .params import OperatorKind, OperatorSpec

_RANK_TOL = 1e-12


class StencilGeometryError(ValueError):
    pass


@dataclass
class RobinData:
    """alpha(x) n.grad + beta(x) data at boundary evaluation points."""

    alpha: np.ndarray
    beta: np.ndarray
    normals: np.ndarray

    def take(self, idx):
        return RobinData(self.alpha[idx], self.beta[idx], self.normals[idx])


@dataclass
class LocalSystem:
    """One stencil's assembled blocks, factorization, and weight columns."""

    coords: np.ndarray
    spec: OperatorSpec
    A: np.ndarray
    Psi: np.ndarray
    center: np.ndarray       # bbox midpoint
    halfwidth: np.ndarray    # bbox half-extents (degenerate axes -> 1)
    factors: object = None
    rhs_A: np.ndarray = None
    rhs_Psi: np.ndarray = None
    W: np.ndarray = None
    Wpsi: np.ndarray = None


@dataclass
class IndicatorResult:
    """Per-candidate stability scores and the accepted mask (center first)."""

    lebesgue: np.ndarray
    oscillation: np.ndarray
    accepted: np.ndarray


def _bbox(coords):
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    center = 0.5 * (lo + hi)
    halfwidth = 0.5 * (hi - lo)
    halfwidth[halfwidth == 0.0] = 1.0
    return center, halfwidth


def _to_hat(points, center, halfwidth):
    return np.ascontiguousarray((points - center) / halfwidth)


def assemble_local(stencil_coords: np.ndarray, spec: OperatorSpec) -> LocalSystem:
    """Kernel matrix and polynomial block for one stencil (LHS only)."""
    coords = np.ascontiguousarray(stencil_coords, dtype=np.float64)
    n = coords.shape[0]
    A = kernels.phs_matrix(coords, spec.m)
    off = A + np.eye(n)
    if np.any(off == 0.0):
        raise StencilGeometryError("stencil contains coincident points")
    center, halfwidth = _bbox(coords)
    pairs = kernels.poly_index_pairs(spec.ell)
    Psi = kernels.poly_design(_to_hat(coords, center, halfwidth), spec.ell, pairs)
    R = sla.qr(Psi, mode="r", pivoting=True, check_finite=False)[0]
    d = np.abs(np.diag(R))
    if d.size and (d.min() < _RANK_TOL * d.max() or d.max() == 0.0):
        raise StencilGeometryError(
            f"rank-deficient polynomial block on stencil centered at "
            f"{tuple(stencil_coords[0])}"
        )
    return LocalSystem(coords=coords, spec=spec, A=A, Psi=Psi,
                       center=center, halfwidth=halfwidth)


def operator_rhs(stencil_coords: np.ndarray, eval_points: np.ndarray,
                 spec: OperatorSpec, op_data: RobinData | None = None):
    """Operator applied to the kernel and polynomial bases at eval points.

    Returns ``(rhs_A, rhs_Psi)`` of shapes (n, p) and (M, p). The bounding
    box scaling is rederived from the stencil coordinates, so results match
    :func:`assemble_local` on the same stencil.
    """
    coords = np.ascontiguousarray(stencil_coords, dtype=np.float64)
    evals = np.ascontiguousarray(np.atleast_2d(eval_points), dtype=np.float64)
    assert spec.m >= spec.kind.theta + 1
    center, halfwidth = _bbox(coords)
    sx, sy = 1.0 / halfwidth[0], 1.0 / halfwidth[1]
    pairs = kernels.poly_index_pairs(spec.ell)
    evals_hat = _to_hat(evals, center, halfwidth)
    if spec.kind is OperatorKind.POINT_EVALUATION:
        rhs_A = kernels.phs_point_rhs(coords, evals, spec.m)
        rhs_Psi = kernels.poly_design(evals_hat, spec.ell, pairs).T
    elif spec.kind is OperatorKind.LAPLACIAN:
        rhs_A = kernels.phs_laplacian_rhs(coords, evals, spec.m)
        rhs_Psi = kernels.poly_laplacian(evals_hat, spec.ell, pairs, sx, sy).T
    elif spec.kind is OperatorKind.BOUNDARY_ROBIN:
        if op_data is None:
            raise ValueError("BoundaryRobin needs RobinData")
        alpha = np.ascontiguousarray(op_data.alpha, dtype=np.float64)
        beta = np.ascontiguousarray(op_data.beta, dtype=np.float64)
        nrm = np.ascontiguousarray(op_data.normals, dtype=np.float64)
        rhs_A = kernels.phs_robin_rhs(coords, evals, spec.m, alpha, beta, nrm)
        rhs_Psi = kernels.poly_robin(evals_hat, spec.ell, pairs, sx, sy,
                                     alpha, beta, nrm).T
    else:  # pragma: no cover
        raise ValueError(f"unknown operator kind {spec.kind}")
    return rhs_A, np.ascontiguousarray(rhs_Psi)


def factorize(system: LocalSystem) -> LocalSystem:
    """Pivoted LU of the (n + M) x (n + M) saddle matrix, stored in place."""
    n = system.A.shape[0]
    M = system.Psi.shape[1]
    K = np.zeros((n + M, n + M))
    K[:n, :n] = system.A
    K[:n, n:] = system.Psi
    K[n:, :n] = system.Psi.T
    system.factors = lu_factor(K)
    return system


def solve_weights(system: LocalSystem) -> LocalSystem:
    """Fill W and Wpsi from the assembled right-hand sides."""
    if system.rhs_A is None or system.rhs_Psi is None:
        raise ValueError("operator right-hand sides not assembled")
    if system.factors is None:
        factorize(system)
    n = system.A.shape[0]
    rhs = np.vstack([system.rhs_A, system.rhs_Psi])
    sol = lu_solve(system.factors, rhs)
    system.W = sol[:n]
    system.Wpsi = sol[n:]
    return system


def indicators(system: LocalSystem) -> IndicatorResult:
    """Stability scores for every candidate column (center = column 0)."""
    if system.W is None:
        raise ValueError("weights not solved")
    leb = np.abs(system.W).sum(axis=0)
    osc = np.abs(
        (system.W * system.rhs_A).sum(axis=0)
        + (system.Wpsi * system.rhs_Psi).sum(axis=0)
    )
    accepted = (leb <= leb[0]) & (osc <= osc[0])
    return IndicatorResult(lebesgue=leb, oscillation=osc, accepted=accepted)


def center_condition(weights_row: np.ndarray) -> bool:
    """Sufficient condition for non-positive real spectrum: 2 w_c >= -|w|_1."""
    w = np.asarray(weights_row, dtype=np.float64)
    return bool(2.0 * w[0] >= -np.abs(w).sum())
