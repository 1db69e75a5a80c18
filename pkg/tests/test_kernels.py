"""The numba and numpy kernel paths must agree."""

import numpy as np
import pytest

from rarefind import _kernels
from rarefind._hashing import hash_tokens


def random_unit(n, d, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_assign_points_numpy_matches_loop():
    x = random_unit(50, 8, 1)
    c = random_unit(4, 8, 2)
    ln, sn = _kernels.assign_points_numpy(x, c)
    ll, sl = _kernels._assign_points_loop(x, c)
    assert np.array_equal(ln, ll)
    assert np.allclose(sn, sl, atol=1e-12)


def test_accumulate_matches_loop():
    x = random_unit(40, 6, 3)
    labels = np.random.default_rng(4).integers(0, 3, size=40)
    a = _kernels.accumulate_centroids_numpy(x, labels, 3)
    b = _kernels._accumulate_centroids_loop(x, labels, 3)
    assert np.allclose(a, b, atol=1e-12)


def test_hashed_ngram_backends_bit_identical():
    rng = np.random.default_rng(5)
    docs = [[f"tok{rng.integers(30)}" for _ in range(int(rng.integers(0, 40)))]
            for _ in range(25)]
    hashes = np.concatenate([hash_tokens(d, seed=7) for d in docs if d] or
                            [np.empty(0, dtype=np.uint64)])
    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    for i, d in enumerate(docs):
        offsets[i + 1] = offsets[i] + len(d)
    a = _kernels.hashed_ngram_counts_numpy(hashes, offsets, 1, 2, 64)
    with np.errstate(over="ignore"):
        b = _kernels._hashed_ngram_counts_loop(hashes, offsets, 1, 2, 64)
    assert np.array_equal(a, b)  # signed unit counts: exact equality
    if _kernels.HAS_NUMBA:
        c = _kernels.hashed_ngram_counts_numba(hashes, offsets, 1, 2, 64)
        assert np.array_equal(a, c)


@pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba unavailable")
def test_numba_assign_matches_numpy():
    x = random_unit(64, 16, 8)
    c = random_unit(5, 16, 9)
    ln, sn = _kernels.assign_points_numpy(x, c)
    lj, sj = _kernels.assign_points_numba(x, c)
    assert np.array_equal(ln, lj)
    assert np.allclose(sn, sj, atol=1e-12)
