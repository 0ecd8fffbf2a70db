#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run as ``python benchmarks/bench_kernels.py``. Set OVERLAPFD_NO_NUMBA=1 to
confirm the dispatched names fall back to the numpy path.
"""

import time

import numpy as np

from overlapfd import kernels
from overlapfd.accel import USE_NUMBA
from overlapfd.stencils import KdTree, _knn, _knn_numpy


def timeit(fn, *args, repeat=200):
    fn(*args)  # warm-up (JIT compilation on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_local_kernels():
    rng = np.random.default_rng(0)
    coords = np.ascontiguousarray(rng.random((73, 2)))
    evals = np.ascontiguousarray(rng.random((73, 2)))
    pairs = kernels.poly_index_pairs(7)
    hat = np.ascontiguousarray(rng.random((73, 2)) * 2 - 1)
    rows = [
        ("phs_matrix (73x73, m=7)",
         lambda: kernels.phs_matrix(coords, 7),
         lambda: kernels.phs_matrix_numpy(coords, 7)),
        ("phs_laplacian_rhs (73x73)",
         lambda: kernels.phs_laplacian_rhs(coords, evals, 7),
         lambda: kernels.phs_laplacian_rhs_numpy(coords, evals, 7)),
        ("poly_design (73, ell=7)",
         lambda: kernels.poly_design(hat, 7, pairs),
         lambda: kernels.poly_design_numpy(hat, 7, pairs)),
        ("poly_laplacian (73, ell=7)",
         lambda: kernels.poly_laplacian(hat, 7, pairs, 1.1, 0.9),
         lambda: kernels.poly_laplacian_numpy(hat, 7, pairs, 1.1, 0.9)),
    ]
    for name, fast, ref in rows:
        t_fast = timeit(lambda: fast())
        t_ref = timeit(lambda: ref())
        print(f"{name:32s} dispatched {1e6 * t_fast:9.1f} us   "
              f"numpy {1e6 * t_ref:9.1f} us   speedup {t_ref / t_fast:5.2f}x")


def bench_knn():
    rng = np.random.default_rng(1)
    pts = rng.random((5000, 2))
    queries = np.ascontiguousarray(rng.random((5000, 2)))
    tree = KdTree(pts)
    active = np.ones(len(pts), dtype=np.bool_)
    k = 31

    def dispatched():
        if _knn is not None:
            _knn(tree._sd, tree._sv, tree._lt, tree._rt, tree._st, tree._en,
                 tree._pm, tree.points, active, queries, k)
        else:
            _knn_numpy(tree.points, active, queries, k)

    def reference():
        _knn_numpy(tree.points, active, queries, k)

    t_fast = timeit(dispatched, repeat=5)
    t_ref = timeit(reference, repeat=5)
    print(f"{'knn query (5000 pts, k=31)':32s} dispatched {1e3 * t_fast:9.2f} ms   "
          f"numpy {1e3 * t_ref:9.2f} ms   speedup {t_ref / t_fast:5.2f}x")


def bench_poisson():
    rng = np.random.default_rng(2)
    cand = rng.random((200_000, 2)) * 2 - 1
    rmin = 0.02
    cell = rmin / np.sqrt(2)
    nc = int(np.ceil(2.2 / cell)) + 1

    def run(fn):
        grid = np.full((nc, nc), -1, dtype=np.int64)
        pts = np.empty((20000, 2))
        fn(cand, rmin, 0.95, -1.1, cell, nc, grid, pts, 0)

    t_fast = timeit(lambda: run(kernels.poisson_accept), repeat=3)
    t_ref = timeit(lambda: run(kernels.poisson_accept_numpy), repeat=3)
    print(f"{'poisson_accept (200k darts)':32s} dispatched {1e3 * t_fast:9.2f} ms   "
          f"numpy {1e3 * t_ref:9.2f} ms   speedup {t_ref / t_fast:5.2f}x")


if __name__ == "__main__":
    print(f"numba path enabled: {USE_NUMBA}")
    bench_local_kernels()
    bench_knn()
    bench_poisson()
