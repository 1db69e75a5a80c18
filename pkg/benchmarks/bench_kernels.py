#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs both implementations of each hot kernel on a synthetic workload and
prints a timing table plus an agreement check. The numba path wins on the
hashed n-gram accumulation (a tight integer loop); the numpy path leans on
BLAS for the k-means assignment matmul, so expect it to win there on
machines with a fast BLAS.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from rarefind import _kernels
from rarefind._hashing import hash_tokens


def timeit(fn, *args, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_hashing(n_docs, tokens_per_doc, dims):
    rng = np.random.default_rng(0)
    vocab = [f"word{i}" for i in range(5000)]
    docs = [[vocab[j] for j in rng.integers(0, len(vocab), tokens_per_doc)]
            for _ in range(n_docs)]
    hashes = np.concatenate([hash_tokens(d, seed=42) for d in docs])
    offsets = np.arange(0, (n_docs + 1) * tokens_per_doc, tokens_per_doc,
                        dtype=np.int64)

    t_np, out_np = timeit(_kernels.hashed_ngram_counts_numpy,
                          hashes, offsets, 1, 2, dims)
    rows = [("hashed_ngrams", "numpy", t_np)]
    if _kernels.HAS_NUMBA:
        _kernels.hashed_ngram_counts_numba(hashes[:64], offsets[:3].copy(),
                                           1, 2, dims)  # warm the JIT
        t_nb, out_nb = timeit(_kernels.hashed_ngram_counts_numba,
                              hashes, offsets, 1, 2, dims)
        assert np.array_equal(out_np, out_nb), "backends disagree"
        rows.append(("hashed_ngrams", "numba", t_nb))
    return rows


def bench_kmeans_step(n_points, dims, k):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(n_points, dims))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    c = rng.normal(size=(k, dims))
    c /= np.linalg.norm(c, axis=1, keepdims=True)

    def step_numpy():
        labels, _ = _kernels.assign_points_numpy(x, c)
        return _kernels.accumulate_centroids_numpy(x, labels, k)

    t_np, out_np = timeit(step_numpy)
    rows = [("kmeans_step", "numpy", t_np)]
    if _kernels.HAS_NUMBA:
        _kernels.assign_points_numba(x[:8], c)  # warm the JIT
        _kernels.accumulate_centroids_numba(x[:8], np.zeros(8, np.int64), k)

        def step_numba():
            labels, _ = _kernels.assign_points_numba(x, c)
            return _kernels.accumulate_centroids_numba(x, labels, k)

        t_nb, out_nb = timeit(step_numba)
        assert np.allclose(out_np, out_nb, atol=1e-9), "backends disagree"
        rows.append(("kmeans_step", "numba", t_nb))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="smaller workload for smoke runs")
    args = parser.parse_args()

    if args.quick:
        hash_args = (2_000, 80, 1024)
        kmeans_args = (5_000, 1024, 12)
    else:
        hash_args = (20_000, 120, 4096)
        kmeans_args = (50_000, 4096, 12)

    print(f"numba available: {_kernels.HAS_NUMBA}; "
          f"active backend: {_kernels.BACKEND}")
    print(f"hashing workload: {hash_args[0]} docs x {hash_args[1]} tokens, "
          f"dims {hash_args[2]}")
    print(f"kmeans workload: {kmeans_args[0]} points, dims {kmeans_args[1]}, "
          f"k {kmeans_args[2]}")
    print()
    rows = bench_hashing(*hash_args) + bench_kmeans_step(*kmeans_args)
    print(f"{'kernel':<16}{'backend':<9}{'best of 3':>12}")
    for kernel, backend, seconds in rows:
        print(f"{kernel:<16}{backend:<9}{seconds:>11.3f}s")

    by_kernel = {}
    for kernel, backend, seconds in rows:
        by_kernel.setdefault(kernel, {})[backend] = seconds
    print()
    for kernel, times in by_kernel.items():
        if len(times) == 2:
            ratio = times["numpy"] / times["numba"]
            faster = "numba" if ratio > 1 else "numpy"
            print(f"{kernel}: {faster} is {max(ratio, 1 / ratio):.1f}x faster")


if __name__ == "__main__":
    main()
