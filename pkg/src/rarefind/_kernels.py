"""Hot numeric kernels: numba-jitted loops with a pure-numpy fallback.

The backend is chosen once at import time. Set RAREFIND_NUMBA=0 to force
the numpy path; the numpy path is also used automatically when numba is
not importable. Both implementations of every kernel stay importable
(``*_numpy`` / ``*_numba``) so benchmarks/bench_kernels.py can compare
them head to head.

The hashed n-gram kernel adds ±1.0 per n-gram, so both backends produce
bit-identical count matrices. The cosine kernels may differ from BLAS in
the last ulp; callers that care use tolerances.
"""

from __future__ import annotations

import os

import numpy as np

from ._hashing import NGRAM_INIT, SIGN_SALT

_ENV_FLAG = os.environ.get("RAREFIND_NUMBA", "1").strip().lower()
_WANT_NUMBA = _ENV_FLAG not in ("0", "false", "no", "off")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _WANT_NUMBA
BACKEND = "numba" if USE_NUMBA else "numpy"


# --- loop bodies (numba-compilable, also runnable as plain python) ---------

def _assign_points_loop(x, c):
    n = x.shape[0]
    k = c.shape[0]
    d = x.shape[1]
    labels = np.empty(n, dtype=np.int64)
    sims = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = -2.0
        best_j = 0
        for j in range(k):
            s = 0.0
            for t in range(d):
                s += x[i, t] * c[j, t]
            if s > best:
                best = s
                best_j = j
        labels[i] = best_j
        sims[i] = best
    return labels, sims


def _accumulate_centroids_loop(x, labels, k):
    d = x.shape[1]
    sums = np.zeros((k, d), dtype=np.float64)
    for i in range(x.shape[0]):
        j = labels[i]
        for t in range(d):
            sums[j, t] += x[i, t]
    return sums


def _splitmix64_scalar(v):
    v = v + np.uint64(0x9E3779B97F4A7C15)
    v = (v ^ (v >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    v = (v ^ (v >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return v ^ (v >> np.uint64(31))


def _hashed_ngram_counts_loop(hashes, offsets, nmin, nmax, dims):
    ndocs = offsets.shape[0] - 1
    out = np.zeros((ndocs, dims), dtype=np.float64)
    init = np.uint64(NGRAM_INIT)
    salt = np.uint64(SIGN_SALT)
    udims = np.uint64(dims)
    for doc in range(ndocs):
        start = offsets[doc]
        end = offsets[doc + 1]
        for n in range(nmin, nmax + 1):
            for i in range(start, end - n + 1):
                g = init
                for j in range(n):
                    g = _splitmix64_scalar(g ^ hashes[i + j])
                bucket = int(g % udims)
                if _splitmix64_scalar(g ^ salt) & np.uint64(1):
                    out[doc, bucket] += 1.0
                else:
                    out[doc, bucket] -= 1.0
    return out


# --- numpy (vectorized) implementations ------------------------------------

def assign_points_numpy(x, c):
    """Max-cosine assignment; ties go to the lowest centroid index."""
    sims = x @ c.T
    labels = sims.argmax(axis=1)
    return labels.astype(np.int64), sims[np.arange(x.shape[0]), labels]


def accumulate_centroids_numpy(x, labels, k):
    sums = np.zeros((k, x.shape[1]), dtype=np.float64)
    for j in range(k):
        mask = labels == j
        if mask.any():
            sums[j] = x[mask].sum(axis=0)
    return sums


def hashed_ngram_counts_numpy(hashes, offsets, nmin, nmax, dims):
    """Signed bucket counts per doc for all token n-grams in [nmin, nmax]."""
    from ._hashing import splitmix64_np

    ndocs = offsets.shape[0] - 1
    total = hashes.shape[0]
    out = np.zeros((ndocs, dims), dtype=np.float64)
    if total == 0:
        return out
    counts = np.diff(offsets)
    doc_of = np.repeat(np.arange(ndocs, dtype=np.int64), counts)
    for n in range(nmin, nmax + 1):
        if total < n:
            continue
        pos = np.arange(total - n + 1)
        valid = doc_of[pos] == doc_of[pos + n - 1]
        pos = pos[valid]
        if pos.size == 0:
            continue
        g = np.full(pos.shape, NGRAM_INIT, dtype=np.uint64)
        for j in range(n):
            g = splitmix64_np(g ^ hashes[pos + j])
        bucket = (g % np.uint64(dims)).astype(np.int64)
        sign = np.where(
            splitmix64_np(g ^ np.uint64(SIGN_SALT)) & np.uint64(1), 1.0, -1.0
        )
        np.add.at(out, (doc_of[pos], bucket), sign)
    return out


# --- backend selection ------------------------------------------------------

if HAS_NUMBA:
    _sm64 = njit(cache=True, inline="always")(_splitmix64_scalar)

    @njit(cache=True)
    def _hashed_ngram_counts_jit(hashes, offsets, nmin, nmax, dims):
        ndocs = offsets.shape[0] - 1
        out = np.zeros((ndocs, dims), dtype=np.float64)
        init = np.uint64(NGRAM_INIT)
        salt = np.uint64(SIGN_SALT)
        udims = np.uint64(dims)
        for doc in range(ndocs):
            start = offsets[doc]
            end = offsets[doc + 1]
            for n in range(nmin, nmax + 1):
                for i in range(start, end - n + 1):
                    g = init
                    for j in range(n):
                        g = _sm64(g ^ hashes[i + j])
                    bucket = int(g % udims)
                    if _sm64(g ^ salt) & np.uint64(1):
                        out[doc, bucket] += 1.0
                    else:
                        out[doc, bucket] -= 1.0
        return out

    assign_points_numba = njit(cache=True)(_assign_points_loop)
    accumulate_centroids_numba = njit(cache=True)(_accumulate_centroids_loop)
    hashed_ngram_counts_numba = _hashed_ngram_counts_jit

if USE_NUMBA:
    assign_points = assign_points_numba
    accumulate_centroids = accumulate_centroids_numba
    hashed_ngram_counts = hashed_ngram_counts_numba
else:
    assign_points = assign_points_numpy
    accumulate_centroids = accumulate_centroids_numpy
    hashed_ngram_counts = hashed_ngram_counts_numpy
