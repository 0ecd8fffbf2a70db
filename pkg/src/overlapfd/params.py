"""Discretization parameters: polynomial degree, PHS degree, stencil size.

Maps a requested approximation order ``xi`` and an operator kind to the
local approximation parameters. Everything here is specialized to d = 2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class OperatorKind(enum.Enum):
    """Linear operators the solver discretizes, tagged with their order."""

    LAPLACIAN = 2
    BOUNDARY_ROBIN = 1
    POINT_EVALUATION = 0

    @property
    def theta(self) -> int:
        """Differential order of the operator."""
        return self.value


class ScalingLaw(enum.Enum):
    """Candidate relations between PHS degree m and polynomial degree ell."""

    CLASSICAL = "classical"  # m = 2*ell + 1
    PLUS_ONE = "plus_one"    # m = ell (odd) or ell + 1 (even)
    MINUS_ONE = "minus_one"  # m = ell (odd) or ell - 1 (even)


def phs_degree(ell: int) -> int:
    """PHS degree for polynomial degree ``ell`` under the default law.

    Returns ``ell`` when odd, ``ell - 1`` when even, floored at 3 so the
    kernel stays at least cubic.
    """
    if ell < 0:
        raise ValueError(f"polynomial degree must be nonnegative, got {ell}")
    m = ell if ell % 2 == 1 else ell - 1
    return max(m, 3)


def phs_degree_alt(ell: int, law: ScalingLaw) -> int:
    """PHS degree under one of the three scaling laws (floored at 3)."""
    if ell < 1:
        raise ValueError(f"polynomial degree must be >= 1, got {ell}")
    if law is ScalingLaw.CLASSICAL:
        m = 2 * ell + 1
    elif law is ScalingLaw.PLUS_ONE:
        m = ell if ell % 2 == 1 else ell + 1
    elif law is ScalingLaw.MINUS_ONE:
        m = ell if ell % 2 == 1 else ell - 1
    else:
        raise ValueError(f"unknown scaling law: {law!r}")
    return max(m, 3)


@dataclass(frozen=True)
class OperatorSpec:
    """Per-operator discretization parameters.

    Attributes
    ----------
    kind : OperatorKind
    xi : int
        Target approximation order.
    ell : int
        Polynomial augmentation degree.
    m : int
        PHS kernel degree (odd, >= 3).
    n : int
        Stencil size, 2*M + 1.
    M : int
        Dimension of the bivariate polynomial space of total degree ell.
    """

    kind: OperatorKind
    xi: int
    ell: int
    m: int
    n: int
    M: int

    def __post_init__(self):
        assert self.M == (self.ell + 2) * (self.ell + 1) // 2
        assert self.n == 2 * self.M + 1
        assert self.m % 2 == 1 and self.m >= 3


def build_spec(kind: OperatorKind, xi: int) -> OperatorSpec:
    """Build the operator spec for approximation order ``xi``.

    The Laplacian uses polynomial degree ``xi + 1``; boundary operators and
    interpolation use degree ``xi``. Stencil size follows n = 2M + 1.
    """
    if xi < 1:
        raise ValueError(f"approximation order must be >= 1, got {xi}")
    ell = xi + 1 if kind is OperatorKind.LAPLACIAN else xi
    M = (ell + 2) * (ell + 1) // 2
    return OperatorSpec(kind=kind, xi=xi, ell=ell, m=phs_degree(ell), n=2 * M + 1, M=M)
