"""Balanced 2D k-d tree and stencil construction over active nodes.

Queries are exact k-nearest-neighbor searches with a deterministic tie
rule: candidates are ordered by (squared distance, original index). The
traversal kernel is numba-compiled when available; the fallback is a
chunked brute-force scan with a stable argsort, which realizes the same
ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import USE_NUMBA, njit

_LEAFSIZE = 16


def _build_arrays(points, leafsize=_LEAFSIZE):
    """Median-split build; returns flat node arrays plus the permutation."""
    npts = points.shape[0]
    perm = np.arange(npts, dtype=np.int64)
    split_dim, split_val = [], []
    left, right, start, end = [], [], [], []

    def rec(lo, hi):
        node = len(split_dim)
        split_dim.append(-1)
        split_val.append(0.0)
        left.append(-1)
        right.append(-1)
        start.append(lo)
        end.append(hi)
        if hi - lo <= leafsize:
            return node
        sub = perm[lo:hi]
        spread = points[sub].max(axis=0) - points[sub].min(axis=0)
        dim = int(np.argmax(spread))
        order = np.argsort(points[sub, dim], kind="stable")
        perm[lo:hi] = sub[order]
        mid = lo + (hi - lo) // 2
        split_dim[node] = dim
        split_val[node] = points[perm[mid], dim]
        left[node] = rec(lo, mid)
        right[node] = rec(mid, hi)
        return node

    rec(0, npts)
    return (
        np.asarray(split_dim, dtype=np.int64),
        np.asarray(split_val, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(start, dtype=np.int64),
        np.asarray(end, dtype=np.int64),
        perm,
    )


def _knn_kernel(split_dim, split_val, left, right, start, end, perm,
                points, active, queries, k):
    nq = queries.shape[0]
    out_idx = np.empty((nq, k), dtype=np.int64)
    out_d2 = np.empty((nq, k), dtype=np.float64)
    stack = np.empty(128, dtype=np.int64)
    hd = np.empty(k, dtype=np.float64)
    hi = np.empty(k, dtype=np.int64)
    for q in range(nq):
        qx = queries[q, 0]
        qy = queries[q, 1]
        size = 0
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            if left[node] == -1:
                for t in range(start[node], end[node]):
                    j = perm[t]
                    if not active[j]:
                        continue
                    dx = points[j, 0] - qx
                    dy = points[j, 1] - qy
                    d2 = dx * dx + dy * dy
                    if size < k:
                        # push and sift up (max-heap on (d2, index))
                        hd[size] = d2
                        hi[size] = j
                        c = size
                        size += 1
                        while c > 0:
                            p = (c - 1) // 2
                            if hd[p] < hd[c] or (hd[p] == hd[c] and hi[p] < hi[c]):
                                hd[p], hd[c] = hd[c], hd[p]
                                hi[p], hi[c] = hi[c], hi[p]
                                c = p
                            else:
                                break
                    elif d2 < hd[0] or (d2 == hd[0] and j < hi[0]):
                        # replace root and sift down
                        hd[0] = d2
                        hi[0] = j
                        c = 0
                        while True:
                            lc = 2 * c + 1
                            rc = lc + 1
                            big = c
                            if lc < k and (hd[lc] > hd[big] or (hd[lc] == hd[big] and hi[lc] > hi[big])):
                                big = lc
                            if rc < k and (hd[rc] > hd[big] or (hd[rc] == hd[big] and hi[rc] > hi[big])):
                                big = rc
                            if big == c:
                                break
                            hd[big], hd[c] = hd[c], hd[big]
                            hi[big], hi[c] = hi[c], hi[big]
                            c = big
            else:
                qv = queries[q, split_dim[node]]
                diff = qv - split_val[node]
                if diff < 0.0:
                    near = left[node]
                    far = right[node]
                else:
                    near = right[node]
                    far = left[node]
                if size < k or diff * diff <= hd[0]:
                    stack[top] = far
                    top += 1
                stack[top] = near
                top += 1
        # sorted extraction: ascending (d2, index) via repeated root removal
        for t in range(size - 1, -1, -1):
            out_d2[q, t] = hd[0]
            out_idx[q, t] = hi[0]
            hd[0] = hd[t]
            hi[0] = hi[t]
            c = 0
            while True:
                lc = 2 * c + 1
                rc = lc + 1
                big = c
                if lc < t and (hd[lc] > hd[big] or (hd[lc] == hd[big] and hi[lc] > hi[big])):
                    big = lc
                if rc < t and (hd[rc] > hd[big] or (hd[rc] == hd[big] and hi[rc] > hi[big])):
                    big = rc
                if big == c:
                    break
                hd[big], hd[c] = hd[c], hd[big]
                hi[big], hi[c] = hi[c], hi[big]
                c = big
    return out_idx, out_d2


if USE_NUMBA:
    _knn = njit(cache=True)(_knn_kernel)
else:
    _knn = None


def _knn_numpy(points, active, queries, k, chunk=256):
    """Brute-force fallback with the same (distance, index) ordering."""
    act_idx = np.flatnonzero(active)
    pts = points[act_idx]
    nq = queries.shape[0]
    out_idx = np.empty((nq, k), dtype=np.int64)
    out_d2 = np.empty((nq, k), dtype=np.float64)
    for lo in range(0, nq, chunk):
        q = queries[lo : lo + chunk]
        d2 = (q[:, None, 0] - pts[None, :, 0]) ** 2 + (q[:, None, 1] - pts[None, :, 1]) ** 2
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out_idx[lo : lo + chunk] = act_idx[order]
        out_d2[lo : lo + chunk] = np.take_along_axis(d2, order, axis=1)
    return out_idx, out_d2


class KdTree:
    """Immutable balanced k-d tree over a fixed point list.

    Nodes can be masked out of queries via :meth:`set_active`; the tree is
    rebuilt on the active subset once more than 20% of the points at the
    last build have toggled off, otherwise the mask is applied at query
    time.
    """

    def __init__(self, points: np.ndarray, leafsize: int = _LEAFSIZE):
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] == 0:
            raise ValueError("KdTree needs an (N, 2) array with N >= 1")
        self.points = points
        self.active = np.ones(points.shape[0], dtype=np.bool_)
        self._leafsize = leafsize
        self._build(points)
        self._subset = None  # original indices when built on a subset
        self._n_at_build = points.shape[0]

    def _build(self, pts):
        (self._sd, self._sv, self._lt, self._rt, self._st, self._en, self._pm) = _build_arrays(
            pts, self._leafsize
        )

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def set_active(self, active: np.ndarray) -> None:
        active = np.asarray(active, dtype=np.bool_)
        if active.shape[0] != self.points.shape[0]:
            raise ValueError("active mask length mismatch")
        self.active = active
        n_act = int(active.sum())
        if n_act == 0:
            raise ValueError("cannot deactivate every point")
        if self._n_at_build - n_act > 0.2 * self._n_at_build:
            self._subset = np.flatnonzero(active)
            self._build(self.points[self._subset])
            self._n_at_build = n_act
        else:
            self._subset = None

    def query(self, queries: np.ndarray, k: int):
        """k nearest active points for each query row.

        Returns ``(idx, dist)`` with shape (Q, k); rows sorted by ascending
        distance, ties by ascending original index.
        """
        queries = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
        if k < 1 or k > self.n_active:
            raise ValueError(f"k={k} out of range (active points: {self.n_active})")
        if self._subset is not None:
            pts = self.points[self._subset]
            mask = self.active[self._subset]
        else:
            pts = self.points
            mask = self.active
        if _knn is not None:
            idx, d2 = _knn(self._sd, self._sv, self._lt, self._rt, self._st, self._en,
                           self._pm, pts, mask, queries, k)
        else:
            idx, d2 = _knn_numpy(pts, mask, queries, k)
        if self._subset is not None:
            idx = self._subset[idx]
        return idx, np.sqrt(d2)


@dataclass
class Stencil:
    """A center node, its n nearest neighbors, and local factorization data.

    ``neighbors_global[0]`` is always the center. ``factored`` and ``bbox``
    are filled by the weight computation.
    """

    center_global: int
    neighbors_global: np.ndarray
    factored: object = None
    bbox: np.ndarray = field(default=None)


def build_tree(points: np.ndarray) -> KdTree:
    return KdTree(points)


def make_stencil(tree: KdTree, center: int, n: int, node_coords: np.ndarray) -> Stencil:
    """Center plus its n-1 nearest active neighbors, center first."""
    if n > tree.n_active:
        raise ValueError(f"stencil size {n} exceeds active node count {tree.n_active}")
    idx, _ = tree.query(node_coords[center][None, :], n)
    idx = idx[0].copy()
    if idx[0] != center:
        # coincident point with a smaller index won the tie: put the
        # center first regardless
        where = np.flatnonzero(idx == center)
        if where.size == 0:
            idx[0] = center
        else:
            idx[where[0]] = idx[0]
            idx[0] = center
    return Stencil(center_global=center, neighbors_global=idx)
