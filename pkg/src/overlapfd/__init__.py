"""Meshfree advection-diffusion solver on moving embedded boundaries.

Overlapped PHS RBF-FD discretization with automatic stability indicators,
semi-Lagrangian BDF time stepping, incremental operator updates, and a
Schur-diagonal preconditioned GMRES solve.
"""

from .params import OperatorKind, OperatorSpec, ScalingLaw, build_spec, phs_degree, phs_degree_alt
from .problems import make_disk2d, make_heat_disk, rel_l2_error
from .timestepper import choose_dt, init_state, run, step

__version__ = "0.1.0"

__all__ = [
    "OperatorKind", "OperatorSpec", "ScalingLaw", "build_spec", "phs_degree",
    "phs_degree_alt", "make_disk2d", "make_heat_disk", "rel_l2_error",
    "choose_dt", "init_state", "run", "step", "__version__",
]
