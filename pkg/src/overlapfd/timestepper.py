"""Implicit semi-Lagrangian time stepping on the moving domain.

Each step advects the boundary seeds, adapts the node set, updates the
differentiation matrices and interpolation bundle incrementally, traces
the new nodes back through the velocity field, reconstructs the BDF
history at the departure points, and solves the implicit system with
equilibration, the Schur-diagonal preconditioner, and a warm-started
GMRES. The first two steps use BDF1 and BDF2.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import geometry, linalg, operators, semilag
from .params import OperatorKind, build_spec
from .weights import RobinData


@dataclass(frozen=True)
class BdfScheme:
    order: int
    lhs_coeff: float
    history_coeffs: tuple


BDF_SCHEMES = {
    1: BdfScheme(1, 1.0, (1.0,)),
    2: BdfScheme(2, 2.0 / 3.0, (4.0 / 3.0, -1.0 / 3.0)),
    3: BdfScheme(3, 6.0 / 11.0, (18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0)),
}


def choose_dt(h: float, velocity_bound: float, t_final: float):
    """Time step 0.3 h / U_max, shrunk so the step count divides T exactly."""
    base = 0.3 * h if velocity_bound == 0.0 else 0.3 * h / velocity_bound
    n_steps = max(1, int(np.ceil(t_final / base - 1e-12)))
    return t_final / n_steps, n_steps


@dataclass
class HistoryLevel:
    t: float
    nodes: geometry.NodeSet
    bundle: operators.InterpBundle
    values_eq: np.ndarray
    values_ghost: np.ndarray


@dataclass
class StepRecord:
    step: int
    t: float
    N: int
    N_b: int
    N_s: int
    rows_copied: int
    rows_recomputed: int
    gmres_iters: int
    residual: float
    wall_ms: float
    extrapolated: int = 0

    FIELDS = ("step", "t", "N", "N_b", "N_s", "rows_copied", "rows_recomputed",
              "gmres_iters", "residual", "wall_ms")


@dataclass
class SolverState:
    problem: object
    xi: int
    h: float
    dt: float
    n_steps: int
    reference: geometry.NodeSet
    model: geometry.DomainModel
    nodes: geometry.NodeSet
    L: operators.DiffMatrix
    B: operators.DiffMatrix
    bundle: operators.InterpBundle
    history: list
    spec_lap: object
    spec_bc: object
    spec_interp: object
    gmres_tol: float
    step_index: int = 0
    t: float = 0.0
    gmres_maxit: int = 500
    use_precond: bool = True
    use_guess: bool = True
    log: list = field(default_factory=list)
    last_update_stats: tuple = None  # (L stats, B stats) from the latest step


def _robin_data(problem, nodes, t):
    pts = nodes.coords[nodes.boundary_idx]
    return RobinData(alpha=problem.alpha(pts, t), beta=problem.beta(pts, t),
                     normals=nodes.boundary_normals)


def init_state(problem, xi: int, h: float, seed: int,
               gmres_tol: float = None, dt: float = None) -> SolverState:
    """Preprocessing: reference nodes, initial operators, initial history."""
    spec_lap = build_spec(OperatorKind.LAPLACIAN, xi)
    spec_bc = build_spec(OperatorKind.BOUNDARY_ROBIN, xi)
    spec_interp = build_spec(OperatorKind.POINT_EVALUATION, xi)
    reference = geometry.generate_reference_nodes(h, seed)
    model = geometry.DomainModel(
        embedded=[geometry.fit_boundary(s) for s in problem.initial_seeds], t=0.0)
    nodes = geometry.adapt_nodes(reference, model)
    L, _ = operators.assemble(nodes, spec_lap)
    B, _ = operators.assemble(nodes, spec_bc, _robin_data(problem, nodes, 0.0))
    bundle = operators.build_interp_bundle(nodes, spec_interp, time_label=0.0)
    if dt is None:
        dt, n_steps = choose_dt(h, problem.u_max, problem.T)
    else:
        n_steps = int(round(problem.T / dt))
    if gmres_tol is None:
        gmres_tol = min(0.1 * h**xi, 1e-7)
    c0_eq = problem.exact(nodes.extended_coords[: nodes.n_eq], 0.0)
    c0_g = problem.exact(nodes.extended_coords[nodes.n_eq :], 0.0)
    level0 = HistoryLevel(t=0.0, nodes=nodes, bundle=bundle,
                          values_eq=c0_eq, values_ghost=c0_g)
    return SolverState(
        problem=problem, xi=xi, h=h, dt=dt, n_steps=n_steps, reference=reference,
        model=model, nodes=nodes, L=L, B=B, bundle=bundle, history=[level0],
        spec_lap=spec_lap, spec_bc=spec_bc, spec_interp=spec_interp,
        gmres_tol=gmres_tol,
    )


def form_system(L, B, scheme: BdfScheme, nu: float, dt: float,
                forcing_eq: np.ndarray, g_b: np.ndarray, departure_values):
    """Sparse BDF block system over (C_i, C_b, C_g) and its right-hand side."""
    n_eq, n_ext = L.mat.shape
    if B.mat.shape[1] != n_ext:
        raise ValueError("L and B column dimensions disagree")
    if len(departure_values) != len(scheme.history_coeffs):
        raise ValueError("departure history does not match the BDF order")
    top = sp.eye(n_eq, n_ext, format="csr")
    if nu != 0.0:
        top = (top - (scheme.lhs_coeff * nu * dt) * L.mat).tocsr()
    A = sp.vstack([top, B.mat], format="csr")
    A.sort_indices()
    rhs_top = scheme.lhs_coeff * dt * forcing_eq
    for coeff, vals in zip(scheme.history_coeffs, departure_values):
        rhs_top = rhs_top + coeff * vals
    return A, np.concatenate([rhs_top, g_b])


def gmres_guess(departure_now: np.ndarray, departure_ghost: np.ndarray) -> np.ndarray:
    """Warm start from level-n values at interior/boundary/ghost departures."""
    return np.concatenate([departure_now, departure_ghost])


def step(state: SolverState) -> SolverState:
    """Advance one time level in place (Algorithm steps 9-19)."""
    problem = state.problem
    t0 = time.perf_counter()
    t_new = state.t + state.dt
    order = min(state.step_index + 1, 3)
    scheme = BDF_SCHEMES[order]

    if state.model.embedded:
        model_new = geometry.advect_seeds(state.model, problem.velocity,
                                          state.t, state.dt)
        nodes_new = geometry.adapt_nodes(state.reference, model_new)
    else:
        model_new = geometry.DomainModel(embedded=[], t=t_new)
        nodes_new = state.nodes

    blocks = (nodes_new.n_interior, nodes_new.n_boundary, nodes_new.n_ghost)
    ext = nodes_new.extended_coords
    L_new, lstats = operators.update(state.L, ext, blocks, spec=state.spec_lap)
    B_new, bstats = operators.update(
        state.B, ext, blocks, spec=state.spec_bc,
        op_data=_robin_data(problem, nodes_new, t_new),
        op_data_changed=problem.bc_time_dependent)
    x_coords = ext[: nodes_new.n_eq]
    bundle_new, _ = operators.update(state.bundle, x_coords,
                                     spec=state.spec_interp, time_label=t_new)

    # trajectory reconstruction for the BDF history levels
    departures = [semilag.back_trace(x_coords, problem.velocity, t_new,
                                     t_new - j * state.dt, state.dt)
                  for j in range(1, order + 1)]
    interp_stats = {}
    dep_set = semilag.reconstruct(
        [(lvl.bundle, lvl.values_eq) for lvl in state.history[:order]],
        departures)

    ghost_coords = ext[nodes_new.n_eq :]
    dep_ghost = semilag.back_trace(ghost_coords, problem.velocity, t_new,
                                   t_new - state.dt, state.dt)
    lvl_n = state.history[0]
    ghost_guess = operators.interp_eval(lvl_n.bundle, lvl_n.values_eq, dep_ghost,
                                        stats=interp_stats)

    forcing_eq = problem.forcing(x_coords, t_new)
    b_pts = nodes_new.coords[nodes_new.boundary_idx]
    g_b = problem.bc_data(b_pts, t_new, nodes_new.boundary_normals)
    A, rhs = form_system(L_new, B_new, scheme, problem.nu, state.dt,
                         forcing_eq, g_b, dep_set.values)

    r_scale, c_scale, Aeq = linalg.equilibrate(A)
    precond = linalg.build_precond(Aeq, (nodes_new.n_eq, nodes_new.n_boundary)) \
        if state.use_precond else None
    x0 = gmres_guess(dep_set.values[0], ghost_guess) if state.use_guess else None
    y0 = None if x0 is None else x0 / c_scale
    y, iters, resnorms = linalg.gmres(Aeq, r_scale * rhs, x0=y0,
                                      tol=state.gmres_tol,
                                      maxit=state.gmres_maxit, precond=precond)
    x = c_scale * y

    level = HistoryLevel(t=t_new, nodes=nodes_new, bundle=bundle_new,
                         values_eq=x[: nodes_new.n_eq],
                         values_ghost=x[nodes_new.n_eq :])
    state.history = [level] + state.history[:2]
    state.model = model_new
    state.nodes = nodes_new
    state.L, state.B, state.bundle = L_new, B_new, bundle_new
    state.last_update_stats = (lstats, bstats)
    state.t = t_new
    state.step_index += 1
    state.log.append(StepRecord(
        step=state.step_index, t=t_new, N=nodes_new.n_eq, N_b=nodes_new.n_boundary,
        N_s=lstats.N_s, rows_copied=lstats.rows_copied + bstats.rows_copied,
        rows_recomputed=lstats.rows_recomputed + bstats.rows_recomputed,
        gmres_iters=iters, residual=resnorms[-1],
        wall_ms=1e3 * (time.perf_counter() - t0),
        extrapolated=interp_stats.get("extrapolated", 0),
    ))
    return state


@dataclass
class RunResult:
    state: SolverState
    error: float
    avg_gmres_iters: float
    preprocess_ms: float
    avg_step_ms: float
    n_final: int

    @property
    def log(self):
        return self.state.log


def run(problem, xi: int, h: float, seed: int = 0, gmres_tol: float = None,
        dt: float = None, use_precond: bool = True, use_guess: bool = True) -> RunResult:
    """Full solve to T; returns the final error and per-step statistics."""
    t0 = time.perf_counter()
    state = init_state(problem, xi, h, seed, gmres_tol=gmres_tol, dt=dt)
    preprocess_ms = 1e3 * (time.perf_counter() - t0)
    state.use_precond = use_precond
    state.use_guess = use_guess
    for _ in range(state.n_steps):
        step(state)
    lvl = state.history[0]
    exact = problem.exact(lvl.nodes.extended_coords[: lvl.nodes.n_eq], state.t)
    from .problems import rel_l2_error

    error = rel_l2_error(lvl.values_eq, exact)
    steps = state.log
    return RunResult(
        state=state, error=error,
        avg_gmres_iters=float(np.mean([s.gmres_iters for s in steps])),
        preprocess_ms=preprocess_ms,
        avg_step_ms=float(np.mean([s.wall_ms for s in steps])),
        n_final=lvl.nodes.n_eq,
    )
