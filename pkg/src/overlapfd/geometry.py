"""Node sets on the unit disk with moving embedded boundaries.

The reference domain is the unit disk: Poisson-disk interior samples plus
equispaced outer-circle boundary nodes, generated once. Embedded
boundaries are closed curves reconstructed from advected seed nodes with a
periodic degree-7 PHS fit; adaptation deactivates covered interior nodes
and regenerates embedded boundary/ghost nodes each step.

Normals stored on a NodeSet always point outward from the simulation
domain: radially out on the unit circle, and into the hole on embedded
boundaries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .linalg import SingularMatrixError, lu_factor, lu_solve
from .semilag import rk3_step
from .stencils import KdTree

INTERIOR, BOUNDARY, GHOST = 0, 1, 2

_PARAM_KERNEL_DEGREE = 7


class NodeGenerationError(RuntimeError):
    pass


class BoundaryError(RuntimeError):
    pass


@dataclass
class NodeSet:
    """Role-tagged scattered points with activity flags.

    Partition properties list active node indices per role. Matrix/solver
    ordering is the concatenation interior -> boundary -> ghost.
    """

    coords: np.ndarray
    role: np.ndarray
    active: np.ndarray
    normals: np.ndarray
    h: float

    @cached_property
    def interior_idx(self) -> np.ndarray:
        return np.flatnonzero(self.active & (self.role == INTERIOR))

    @cached_property
    def boundary_idx(self) -> np.ndarray:
        return np.flatnonzero(self.active & (self.role == BOUNDARY))

    @cached_property
    def ghost_idx(self) -> np.ndarray:
        return np.flatnonzero(self.active & (self.role == GHOST))

    @cached_property
    def extended_index(self) -> np.ndarray:
        return np.concatenate([self.interior_idx, self.boundary_idx, self.ghost_idx])

    @property
    def n_interior(self) -> int:
        return self.interior_idx.size

    @property
    def n_boundary(self) -> int:
        return self.boundary_idx.size

    @property
    def n_ghost(self) -> int:
        return self.ghost_idx.size

    @property
    def n_eq(self) -> int:
        """Equation nodes: interior + boundary."""
        return self.n_interior + self.n_boundary

    @cached_property
    def extended_coords(self) -> np.ndarray:
        return self.coords[self.extended_index]

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        return self.normals[self.boundary_idx]


def h_for_target(n_target: int) -> float:
    """Spacing that yields about ``n_target`` disk nodes (interior+boundary).

    Calibrated against the dart-throwing density: N(h) ~ (1.852 / h)^2.
    """
    if n_target < 50:
        raise ValueError("node target too small for the unit disk")
    return 1.852 / np.sqrt(n_target)


def _disk_boundary(h: float):
    nb = int(round(2.0 * np.pi / h))
    theta = 2.0 * np.pi * np.arange(nb) / nb
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    return pts, pts.copy()  # unit-circle points are their own outward normals


def generate_reference_nodes(h: float, seed: int) -> NodeSet:
    """Reference node set for the unit disk.

    Interior nodes are Poisson-disk samples with minimum spacing 0.8*h,
    boundary nodes are equispaced on the unit circle, and ghost nodes sit
    at offset h along the outward normals. Deterministic for a given seed.
    """
    if not (0.0 < h < 0.5):
        raise ValueError(f"spacing h must lie in (0, 0.5), got {h}")
    rmin = 0.8 * h
    rmax = 1.0 - 0.75 * h  # keep interior samples off the circle nodes
    area = np.pi * rmax * rmax
    # random sequential adsorption saturates near 0.547 area coverage
    expected = int(0.6965 * area / (rmin * rmin))
    budget = min(max(250 * max(expected, 100), 200_000), 3_000_000)

    cell = rmin / np.sqrt(2.0)
    origin = -1.0 - 1e-9
    ncell = int(np.ceil((2.0 + 2e-9) / cell)) + 1
    grid = np.full((ncell, ncell), -1, dtype=np.int64)
    pts = np.empty((int(expected * 1.5) + 64, 2))
    count = 0
    rng = np.random.default_rng(seed)
    batch = 4096
    idle = 0
    drawn = 0
    while drawn < budget and idle < 12:
        cand = rng.random((batch, 2)) * 2.0 - 1.0
        drawn += batch
        new_count = kernels.poisson_accept(cand, rmin, rmax, origin, cell, ncell, grid, pts, count)
        idle = idle + 1 if new_count == count else 0
        count = new_count
    if count < 0.7 * expected:
        raise NodeGenerationError(
            f"dart throwing reached only {count} interior nodes "
            f"(target about {expected}) at h={h}"
        )
    interior = pts[:count].copy()
    bpts, bnrm = _disk_boundary(h)
    gpts = bpts + h * bnrm

    coords = np.vstack([interior, bpts, gpts])
    role = np.concatenate([
        np.full(count, INTERIOR, dtype=np.int8),
        np.full(len(bpts), BOUNDARY, dtype=np.int8),
        np.full(len(gpts), GHOST, dtype=np.int8),
    ])
    normals = np.zeros_like(coords)
    normals[count : count + len(bpts)] = bnrm
    return NodeSet(coords=coords, role=role, active=np.ones(len(coords), dtype=bool),
                   normals=normals, h=h)


# ----------------------------------------------------------------------
# Parametric boundaries
# ----------------------------------------------------------------------

def _chordal(mu_a, mu_b):
    return 2.0 * np.abs(np.sin(0.5 * (mu_a[:, None] - mu_b[None, :])))


@dataclass
class ParametricBoundary:
    """Closed curve through seed nodes: periodic PHS interpolant of x and y.

    The kernel is the chordal-distance PHS of degree 7 with a constant
    term, which is exactly 2*pi-periodic in the parameter.
    """

    seeds: np.ndarray
    params: np.ndarray
    kernel_degree: int
    coeffs: np.ndarray  # (k + 1, 2): kernel coefficients plus constant
    orientation: str    # "ccw" or "cw"

    def evaluate(self, mu: np.ndarray) -> np.ndarray:
        mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
        K = _chordal(mu, self.params) ** self.kernel_degree
        return K @ self.coeffs[:-1] + self.coeffs[-1]

    def tangent(self, mu: np.ndarray) -> np.ndarray:
        mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
        delta = mu[:, None] - self.params[None, :]
        s = np.sin(0.5 * delta)
        deg = self.kernel_degree
        dK = deg * 2.0 ** (deg - 1) * s * np.abs(s) ** (deg - 2) * np.cos(0.5 * delta)
        return dK @ self.coeffs[:-1]

    def normals(self, mu: np.ndarray) -> np.ndarray:
        """Unit normals pointing away from the region the curve encloses."""
        t = self.tangent(mu)
        norm = np.hypot(t[:, 0], t[:, 1])
        if np.any(norm == 0.0):
            raise BoundaryError("zero tangent on parametric boundary")
        n = np.column_stack([t[:, 1], -t[:, 0]]) / norm[:, None]
        return n if self.orientation == "ccw" else -n

    def sample(self, count: int):
        """(points, curve-outward normals) at `count` uniform parameters."""
        mu = 2.0 * np.pi * np.arange(count) / count
        return self.evaluate(mu), self.normals(mu)

    def arc_length_params(self, spacing: float, dense: int = 4096):
        """Parameter values spaced about `spacing` apart in arc length."""
        mu = 2.0 * np.pi * np.arange(dense + 1) / dense
        p = self.evaluate(mu)
        seg = np.hypot(np.diff(p[:, 0]), np.diff(p[:, 1]))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        total = s[-1]
        count = int(round(total / spacing))
        if count < 8:
            raise BoundaryError(
                f"boundary produces only {count} nodes at spacing {spacing}: under-resolved"
            )
        targets = total * np.arange(count) / count
        return np.interp(targets, s, mu), total


def fit_boundary(seeds: np.ndarray) -> ParametricBoundary:
    """Periodic degree-7 PHS interpolant through ordered seed nodes."""
    seeds = np.asarray(seeds, dtype=np.float64)
    if seeds.ndim != 2 or seeds.shape[1] != 2 or seeds.shape[0] < 8:
        raise BoundaryError("need at least 8 ordered (x, y) seeds")
    d2 = ((seeds[:, None, :] - seeds[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    if d2.min() == 0.0:
        raise BoundaryError("coincident seeds make the boundary interpolation singular")
    k = seeds.shape[0]
    mu = 2.0 * np.pi * np.arange(k) / k
    K = _chordal(mu, mu) ** _PARAM_KERNEL_DEGREE
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = K
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    rhs = np.zeros((k + 1, 2))
    rhs[:k] = seeds
    try:
        coeffs = lu_solve(lu_factor(A), rhs)
    except SingularMatrixError as exc:
        raise BoundaryError("singular boundary interpolation matrix "
                            "(coincident seeds?)") from exc
    x, y = seeds[:, 0], seeds[:, 1]
    shoelace = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return ParametricBoundary(
        seeds=seeds, params=mu, kernel_degree=_PARAM_KERNEL_DEGREE,
        coeffs=coeffs, orientation="ccw" if shoelace > 0 else "cw",
    )


# ----------------------------------------------------------------------
# Domain model and classification
# ----------------------------------------------------------------------

@dataclass
class DomainModel:
    """Unit-disk reference domain minus the regions behind embedded curves."""

    embedded: list
    t: float = 0.0
    sample_density: int = 512
    _samples: list = field(default_factory=list, repr=False)
    _sample_normals: list = field(default_factory=list, repr=False)
    _sample_trees: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        for bnd in self.embedded:
            p, n = bnd.sample(self.sample_density)
            if np.any(np.hypot(p[:, 0], p[:, 1]) >= 1.0):
                raise BoundaryError("embedded boundary intersects the outer circle")
            self._samples.append(p)
            self._sample_normals.append(n)
            self._sample_trees.append(KdTree(p))


def classify(points: np.ndarray, model: DomainModel) -> np.ndarray:
    """True where a point lies inside the current domain.

    The test is the sign of (p - b) . n at the nearest sampled boundary
    point of each curve; boundary-coincident points classify outside.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    inside = np.hypot(points[:, 0], points[:, 1]) < 1.0
    for samples, normals, tree in zip(model._samples, model._sample_normals,
                                      model._sample_trees):
        idx, _ = tree.query(points, 1)
        b = samples[idx[:, 0]]
        n = normals[idx[:, 0]]
        s = (points[:, 0] - b[:, 0]) * n[:, 0] + (points[:, 1] - b[:, 1]) * n[:, 1]
        inside &= s > 0.0
    return inside


def _min_distance_to(points, samples_tree):
    _, d = samples_tree.query(points, 1)
    return d[:, 0]


def adapt_nodes(reference: NodeSet, model: DomainModel) -> NodeSet:
    """Adapt the reference set to the current embedded boundaries.

    Interior nodes covered by an embedded region, or closer than 0.5*h to
    an embedded curve, are deactivated. Embedded boundary nodes are
    regenerated at spacing about h with ghost nodes at offset h on the
    non-domain side.
    """
    h = reference.h
    is_interior = reference.role == INTERIOR
    int_coords = reference.coords[is_interior]

    if not model.embedded:
        return NodeSet(coords=reference.coords.copy(), role=reference.role.copy(),
                       active=reference.active.copy() | is_interior,
                       normals=reference.normals.copy(), h=h)

    active_int = classify(int_coords, model)
    emb_pts, emb_nrm, emb_gst = [], [], []
    for bnd in model.embedded:
        mu, total = bnd.arc_length_params(h)
        cull_tree = KdTree(bnd.evaluate(
            2.0 * np.pi * np.arange(int(20 * total / h)) / int(20 * total / h)))
        active_int &= _min_distance_to(int_coords, cull_tree) >= 0.5 * h
        pts = bnd.evaluate(mu)
        out = bnd.normals(mu)          # away from the enclosed hole
        emb_pts.append(pts)
        emb_nrm.append(-out)           # domain-outward: into the hole
        emb_gst.append(pts - h * out)

    keep_outer_b = (reference.role == BOUNDARY)
    keep_outer_g = (reference.role == GHOST)
    coords = np.vstack(
        [int_coords, reference.coords[keep_outer_b]] + emb_pts
        + [reference.coords[keep_outer_g]] + emb_gst
    )
    n_emb_b = sum(len(p) for p in emb_pts)
    n_outer_b = int(keep_outer_b.sum())
    n_outer_g = int(keep_outer_g.sum())
    role = np.concatenate([
        np.full(len(int_coords), INTERIOR, dtype=np.int8),
        np.full(n_outer_b + n_emb_b, BOUNDARY, dtype=np.int8),
        np.full(n_outer_g + n_emb_b, GHOST, dtype=np.int8),
    ])
    active = np.ones(len(coords), dtype=bool)
    active[: len(int_coords)] = active_int
    normals = np.zeros_like(coords)
    normals[len(int_coords) : len(int_coords) + n_outer_b] = \
        reference.normals[keep_outer_b]
    normals[len(int_coords) + n_outer_b : len(int_coords) + n_outer_b + n_emb_b] = \
        np.vstack(emb_nrm)
    return NodeSet(coords=coords, role=role, active=active, normals=normals, h=h)


def advect_seeds(model: DomainModel, velocity, t: float, dt: float) -> DomainModel:
    """Advance every embedded boundary's seeds one forward RK3 step, refit."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    new = []
    for bnd in model.embedded:
        seeds = rk3_step(velocity, bnd.seeds, t, dt)
        new.append(fit_boundary(seeds))
    return DomainModel(embedded=new, t=t + dt, sample_density=model.sample_density)


def normals(boundary: ParametricBoundary, at: np.ndarray) -> np.ndarray:
    return boundary.normals(at)


# ----------------------------------------------------------------------
# CSV interchange
# ----------------------------------------------------------------------

def export_nodes(path, nodes: NodeSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "role"])
        for i in np.flatnonzero(nodes.active):
            w.writerow([f"{nodes.coords[i, 0]:.17g}", f"{nodes.coords[i, 1]:.17g}",
                        int(nodes.role[i])])


def import_nodes(path, h: float) -> NodeSet:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    coords = data[:, :2].astype(np.float64)
    role = data[:, 2].astype(np.int8)
    return NodeSet(coords=coords, role=role, active=np.ones(len(coords), dtype=bool),
                   normals=np.zeros_like(coords), h=h)


def export_seeds(path, seeds: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for p in seeds:
            w.writerow([f"{p[0]:.17g}", f"{p[1]:.17g}"])


def import_seeds(path) -> np.ndarray:
    return np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1)).astype(np.float64)
