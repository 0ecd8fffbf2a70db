"""Sparse differentiation matrices via the automatic overlapped sweep.

The sweep visits equation nodes in ascending index. Each unclaimed node
becomes a stencil center: one local factorization yields candidate weight
columns for every equation node on the stencil, the two stability
indicators decide which candidates are kept, and accepted candidates whose
rows are still unclaimed get their matrix rows written (first writer
wins). Every equation node ends claimed because a center always accepts
itself.

The same sweep drives the interpolation bundle (point evaluation operator,
no ghost nodes in the support) and the incremental update, which copies
rows of stencils whose node positions survived unchanged and re-runs the
sweep only on what is left.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import lu_solve, make_csr
from .params import OperatorKind, OperatorSpec
from .stencils import KdTree, make_stencil
from .weights import (LocalSystem, RobinData, StencilGeometryError,
                      assemble_local, factorize, indicators, operator_rhs,
                      solve_weights)
from . import kernels

_POS_TOL = 1e-12


@dataclass
class AssemblyStats:
    N_s: int
    rows_copied: int
    rows_recomputed: int
    kappa_estimate: float
    recomputed_rows: np.ndarray = None  # filled by the update path


@dataclass
class StencilRecord:
    """Bookkeeping for one stencil: geometry, claims, optional factors."""

    members: np.ndarray        # support indices, center first
    member_pos: np.ndarray     # (n, 2) positions at build time
    claimed_slots: np.ndarray  # indices into members whose rows this stencil wrote
    radius: float
    factors: object = None
    bbox: tuple = None         # (center, halfwidth) of the local basis map

    @property
    def center_pos(self):
        return self.member_pos[0]


@dataclass
class DiffMatrix:
    """Row-compressed differentiation matrix plus its stencil provenance.

    Rows follow equation-node order; columns follow the support
    (interior, boundary, ghost) order. ``block_sizes = (Ni, Nb, Ng)``.
    """

    mat: sp.csr_matrix
    row_origin: np.ndarray
    records: list
    block_sizes: tuple
    eq_kind: str  # "full" (interior+boundary rows) or "boundary"

    def block(self, name: str) -> sp.csr_matrix:
        ni, nb, ng = self.block_sizes
        cols = {"i": slice(0, ni), "b": slice(ni, ni + nb), "g": slice(ni + nb, ni + nb + ng)}
        if self.eq_kind == "full":
            rows = {"i": slice(0, ni), "b": slice(ni, ni + nb)}
        else:
            rows = {"b": slice(0, nb)}
        return self.mat[rows[name[0]], cols[name[1]]]


@dataclass
class InterpBundle:
    """Interpolation stencils with stored factorizations, no global matrix."""

    records: list
    node_coords: np.ndarray
    spec: OperatorSpec
    centers_tree: KdTree
    claimed_by: np.ndarray
    time_label: float = None

    @property
    def stats(self) -> AssemblyStats:
        n = self.node_coords.shape[0]
        return AssemblyStats(N_s=len(self.records), rows_copied=0,
                             rows_recomputed=n,
                             kappa_estimate=self.spec.n * len(self.records) / n)


def _robin_slice(op_data, eq_rows):
    return op_data.take(eq_rows) if op_data is not None else None


def _sweep(support_coords, eq_index, spec, op_data, claimed, tree,
           keep_factors, emit_row):
    """Claim sweep over unclaimed equation nodes; returns new records."""
    n_sup = support_coords.shape[0]
    eq_row_of = np.full(n_sup, -1, dtype=np.int64)
    eq_row_of[eq_index] = np.arange(eq_index.size)
    records = []
    for r in range(eq_index.size):
        if claimed[r]:
            continue
        g = eq_index[r]
        stencil = make_stencil(tree, g, spec.n, support_coords)
        members = stencil.neighbors_global
        rows = eq_row_of[members]
        coords = support_coords[members]
        # candidates live in the inner half of the stencil: rows claimed
        # from the outer band are one-sided and destabilize the spectrum
        # regardless of their indicator scores
        d = np.sqrt(((coords - coords[0]) ** 2).sum(axis=1))
        cand_slots = np.flatnonzero(
            (rows >= 0) & ~claimed[np.maximum(rows, 0)] & (d <= 0.5 * d.max()))
        # center stays the indicator baseline: slot 0 is the center and is
        # unclaimed by construction, hence always first in cand_slots
        try:
            system = assemble_local(coords, spec)
            system.rhs_A, system.rhs_Psi = operator_rhs(
                coords, coords[cand_slots], spec,
                _robin_slice(op_data, rows[cand_slots]))
            solve_weights(system)
        except StencilGeometryError as exc:
            raise StencilGeometryError(
                f"stencil centered at support node {g}: {exc}") from exc
        ind = indicators(system)
        claimed_slots = []
        for c, slot in enumerate(cand_slots):
            if not ind.accepted[c]:
                continue
            row = rows[slot]
            claimed[row] = True
            claimed_slots.append(slot)
            emit_row(row, len(records), members, system.W[:, c])
        d = coords - coords[0]
        records.append(StencilRecord(
            members=members,
            member_pos=coords.copy(),
            claimed_slots=np.asarray(claimed_slots, dtype=np.int64),
            radius=float(np.sqrt((d * d).sum(axis=1).max())),
            factors=system.factors if keep_factors else None,
            bbox=(system.center, system.halfwidth) if keep_factors else None,
        ))
    return records


def _eq_index_for(spec, block_sizes):
    ni, nb, _ = block_sizes
    if spec.kind is OperatorKind.BOUNDARY_ROBIN:
        return np.arange(ni, ni + nb, dtype=np.int64)
    return np.arange(ni + nb, dtype=np.int64)


def assemble_points(support_coords, eq_index, spec, op_data=None,
                    block_sizes=None, tree=None):
    """Assemble a differentiation matrix on explicit point arrays.

    ``eq_index`` lists the support indices that own rows, in row order.
    """
    support_coords = np.ascontiguousarray(support_coords, dtype=np.float64)
    if block_sizes is None:
        block_sizes = (support_coords.shape[0], 0, 0)
    if tree is None:
        tree = KdTree(support_coords)
    n_eq = eq_index.size
    claimed = np.zeros(n_eq, dtype=bool)
    rows = np.empty(n_eq * spec.n, dtype=np.int64)
    cols = np.empty(n_eq * spec.n, dtype=np.int64)
    vals = np.empty(n_eq * spec.n, dtype=np.float64)
    origin = np.full(n_eq, -1, dtype=np.int64)
    cursor = 0

    def emit(row, stencil_id, members, w):
        nonlocal cursor
        rows[cursor : cursor + spec.n] = row
        cols[cursor : cursor + spec.n] = members
        vals[cursor : cursor + spec.n] = w
        origin[row] = stencil_id
        cursor += spec.n

    records = _sweep(support_coords, eq_index, spec, op_data, claimed, tree,
                     keep_factors=False, emit_row=emit)
    assert claimed.all(), "assembly sweep left unclaimed equation nodes"
    mat = make_csr(rows[:cursor], cols[:cursor], vals[:cursor],
                   (n_eq, support_coords.shape[0]))
    stats = AssemblyStats(N_s=len(records), rows_copied=0, rows_recomputed=n_eq,
                          kappa_estimate=spec.n * len(records) / n_eq)
    eq_kind = "boundary" if spec.kind is OperatorKind.BOUNDARY_ROBIN else "full"
    return DiffMatrix(mat=mat, row_origin=origin, records=records,
                      block_sizes=block_sizes, eq_kind=eq_kind), stats


def assemble(nodes, spec, op_data=None):
    """Assemble L (Laplacian) or B (boundary operator) on a NodeSet."""
    block_sizes = (nodes.n_interior, nodes.n_boundary, nodes.n_ghost)
    eq_index = _eq_index_for(spec, block_sizes)
    return assemble_points(nodes.extended_coords, eq_index, spec,
                           op_data=op_data, block_sizes=block_sizes)


def build_interp_bundle(nodes, spec_eval, time_label=None) -> InterpBundle:
    """Interpolation stencils over interior + boundary nodes (no ghosts)."""
    if spec_eval.kind is not OperatorKind.POINT_EVALUATION:
        raise ValueError("interpolation bundle needs a point-evaluation spec")
    idx = np.concatenate([nodes.interior_idx, nodes.boundary_idx])
    coords = np.ascontiguousarray(nodes.coords[idx])
    return _bundle_on_points(coords, spec_eval, time_label)


def _bundle_on_points(coords, spec_eval, time_label=None) -> InterpBundle:
    n = coords.shape[0]
    eq_index = np.arange(n, dtype=np.int64)
    claimed = np.zeros(n, dtype=bool)
    claimed_by = np.full(n, -1, dtype=np.int64)
    tree = KdTree(coords)

    def emit(row, stencil_id, members, w):
        claimed_by[row] = stencil_id

    records = _sweep(coords, eq_index, spec_eval, None, claimed, tree,
                     keep_factors=True, emit_row=emit)
    assert claimed.all()
    centers = np.array([rec.center_pos for rec in records])
    return InterpBundle(records=records, node_coords=coords, spec=spec_eval,
                        centers_tree=KdTree(centers), claimed_by=claimed_by,
                        time_label=time_label)


def interp_eval(bundle: InterpBundle, nodal_values, query_points,
                stats: dict = None) -> np.ndarray:
    """Evaluate the bundle's local interpolants at arbitrary query points.

    Queries are grouped by nearest stencil center (ties to the lower
    stencil id); each group costs one back-substitution plus evaluations.
    Out-of-hull queries extrapolate from the nearest stencil.
    """
    queries = np.ascontiguousarray(np.atleast_2d(query_points), dtype=np.float64)
    values = np.asarray(nodal_values, dtype=np.float64)
    if values.shape[0] != bundle.node_coords.shape[0]:
        raise ValueError("nodal value vector does not match bundle node set")
    out = np.empty(queries.shape[0])
    sid, dist = bundle.centers_tree.query(queries, 1)
    sid = sid[:, 0]
    spec = bundle.spec
    pairs = kernels.poly_index_pairs(spec.ell)
    order = np.argsort(sid, kind="stable")
    bounds = np.searchsorted(sid[order], np.arange(len(bundle.records) + 1))
    extrapolated = 0
    for s in np.unique(sid[order]):
        sel = order[bounds[s] : bounds[s + 1]]
        rec = bundle.records[s]
        rhs = np.concatenate([values[rec.members], np.zeros(spec.M)])
        coef = lu_solve(rec.factors, rhs)
        q = queries[sel]
        phi = kernels.phs_point_rhs(rec.member_pos, q, spec.m)
        center, halfwidth = rec.bbox
        psi = kernels.poly_design(
            np.ascontiguousarray((q - center) / halfwidth), spec.ell, pairs)
        out[sel] = phi.T @ coef[: spec.n] + psi @ coef[spec.n :]
        extrapolated += int((dist[sel, 0] > rec.radius).sum())
    if stats is not None:
        stats["extrapolated"] = stats.get("extrapolated", 0) + extrapolated
    return out


# ----------------------------------------------------------------------
# Incremental update
# ----------------------------------------------------------------------

def _match_records(records, new_tree, new_support, n):
    """Match old stencils positionally in the new support set.

    Yields ``(record, new_members)`` for every stencil whose center and
    full neighbor set survive within 1e-12.
    """
    if not records:
        return
    centers = np.array([rec.center_pos for rec in records])
    cidx, cdist = new_tree.query(centers, 1)
    for k, rec in enumerate(records):
        if cdist[k, 0] > _POS_TOL:
            continue
        new_idx, _ = new_tree.query(rec.center_pos[None, :], n)
        new_idx = new_idx[0]
        new_pos = new_support[new_idx]
        old_order = np.lexsort((rec.member_pos[:, 1], rec.member_pos[:, 0]))
        new_order = np.lexsort((new_pos[:, 1], new_pos[:, 0]))
        if not np.allclose(rec.member_pos[old_order], new_pos[new_order],
                           rtol=0.0, atol=_POS_TOL):
            continue
        # same sorted geometry: slot i of the old stencil maps to the new
        # support index occupying the same lexicographic rank
        new_members = np.empty(n, dtype=np.int64)
        new_members[old_order] = new_idx[new_order]
        yield rec, new_members


def update(old, new_support_coords, new_block_sizes=None, spec=None,
           op_data=None, op_data_changed=False, time_label=None):
    """Update a DiffMatrix or InterpBundle to a new node set.

    Stencils whose center and neighbor positions are unchanged have their
    rows copied (matrix) or factorizations reused (bundle); everything else
    is recomputed by the assembly sweep restricted to unclaimed nodes.
    """
    if spec is None:
        raise ValueError("update requires the operator spec")
    if isinstance(old, InterpBundle):
        return _update_bundle(old, new_support_coords, spec,
                              time_label=time_label)
    return _update_matrix(old, new_support_coords, new_block_sizes, spec,
                          op_data, op_data_changed)


def _update_matrix(old: DiffMatrix, new_support_coords, new_block_sizes, spec,
                   op_data, op_data_changed):
    support = np.ascontiguousarray(new_support_coords, dtype=np.float64)
    tree = KdTree(support)
    eq_index = _eq_index_for(spec, new_block_sizes)
    n_sup = support.shape[0]
    n_eq = eq_index.size
    eq_row_of = np.full(n_sup, -1, dtype=np.int64)
    eq_row_of[eq_index] = np.arange(n_eq)

    claimed = np.zeros(n_eq, dtype=bool)
    rows = np.empty(n_eq * spec.n, dtype=np.int64)
    cols = np.empty(n_eq * spec.n, dtype=np.int64)
    vals = np.empty(n_eq * spec.n, dtype=np.float64)
    origin = np.full(n_eq, -1, dtype=np.int64)
    cursor = 0
    records = []
    rows_copied = 0

    old_csr = old.mat
    if not op_data_changed:
        for rec, new_members in _match_records(old.records, tree, support, spec.n):
            slot_sorter = np.argsort(rec.members)
            members_sorted = rec.members[slot_sorter]
            kept = []
            for slot in rec.claimed_slots:
                r_new = eq_row_of[new_members[slot]]
                if r_new < 0 or claimed[r_new]:
                    continue
                kept.append((slot, r_new))
            if not kept:
                continue
            records.append(StencilRecord(
                members=new_members, member_pos=rec.member_pos,
                claimed_slots=np.asarray([s for s, _ in kept], dtype=np.int64),
                radius=rec.radius, factors=None, bbox=None))
            sid = len(records) - 1
            for slot, r_new in kept:
                claimed[r_new] = True
                old_row = _old_row_for(old, rec, slot)
                lo, hi = old_csr.indptr[old_row], old_csr.indptr[old_row + 1]
                old_cols = old_csr.indices[lo:hi]
                old_vals = old_csr.data[lo:hi]
                slots = slot_sorter[np.searchsorted(members_sorted, old_cols)]
                ncopy = old_cols.size
                rows[cursor : cursor + ncopy] = r_new
                cols[cursor : cursor + ncopy] = new_members[slots]
                vals[cursor : cursor + ncopy] = old_vals
                origin[r_new] = sid
                cursor += ncopy
                rows_copied += 1

    def emit(row, stencil_id, members, w):
        nonlocal cursor
        rows[cursor : cursor + spec.n] = row
        cols[cursor : cursor + spec.n] = members
        vals[cursor : cursor + spec.n] = w
        origin[row] = len(records) + stencil_id
        cursor += spec.n

    recomputed = np.flatnonzero(~claimed)
    new_records = _sweep(support, eq_index, spec, op_data, claimed, tree,
                         keep_factors=False, emit_row=emit)
    records.extend(new_records)
    assert claimed.all()
    mat = make_csr(rows[:cursor], cols[:cursor], vals[:cursor], (n_eq, n_sup))
    stats = AssemblyStats(N_s=len(records), rows_copied=rows_copied,
                          rows_recomputed=n_eq - rows_copied,
                          kappa_estimate=spec.n * len(records) / n_eq,
                          recomputed_rows=recomputed)
    return DiffMatrix(mat=mat, row_origin=origin, records=records,
                      block_sizes=new_block_sizes, eq_kind=old.eq_kind), stats


def _old_row_for(old: DiffMatrix, rec: StencilRecord, slot: int) -> int:
    """Old matrix row owned by a stencil slot (support index -> eq row)."""
    sup = int(rec.members[slot])
    return sup if old.eq_kind == "full" else sup - old.block_sizes[0]


def _update_bundle(old: InterpBundle, new_coords, spec, time_label=None):
    coords = np.ascontiguousarray(new_coords, dtype=np.float64)
    tree = KdTree(coords)
    n = coords.shape[0]
    claimed = np.zeros(n, dtype=bool)
    claimed_by = np.full(n, -1, dtype=np.int64)
    records = []
    copied = 0
    for rec, new_members in _match_records(old.records, tree, coords, spec.n):
        kept = [slot for slot in rec.claimed_slots
                if not claimed[new_members[slot]]]
        if not kept:
            continue
        records.append(StencilRecord(
            members=new_members, member_pos=rec.member_pos,
            claimed_slots=np.asarray(kept, dtype=np.int64),
            radius=rec.radius, factors=rec.factors, bbox=rec.bbox))
        for slot in kept:
            claimed[new_members[slot]] = True
            claimed_by[new_members[slot]] = len(records) - 1
            copied += 1

    def emit(row, stencil_id, members, w):
        claimed_by[row] = len(records) + stencil_id

    eq_index = np.arange(n, dtype=np.int64)
    recomputed = np.flatnonzero(~claimed)
    new_records = _sweep(coords, eq_index, spec, None, claimed, tree,
                         keep_factors=True, emit_row=emit)
    records.extend(new_records)
    assert claimed.all()
    centers = np.array([rec.center_pos for rec in records])
    bundle = InterpBundle(records=records, node_coords=coords, spec=spec,
                          centers_tree=KdTree(centers), claimed_by=claimed_by,
                          time_label=time_label)
    stats = AssemblyStats(N_s=len(records), rows_copied=copied,
                          rows_recomputed=n - copied,
                          kappa_estimate=spec.n * len(records) / n,
                          recomputed_rows=recomputed)
    return bundle, stats
