"""Stable seeded 64-bit hashing shared by the embedding kernels.

Python's builtin hash() is salted per process, so every hash here is built
from FNV-1a over UTF-8 bytes plus splitmix64 finalization. The same mixing
arithmetic (mod 2**64) is reimplemented inside the numba/numpy kernels;
constants must stay in sync with _kernels.py.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
NGRAM_INIT = 0x2545F4914F6CDD1D
SIGN_SALT = 0xD6E8FEB86659FD93


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer (deterministic, well mixed)."""
    x = (x + SPLITMIX_GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def token_hash(token: str, seed: int) -> int:
    """Seeded hash of one token; the unit the n-gram kernels combine."""
    return splitmix64(fnv1a64(token.encode("utf-8")) ^ splitmix64(seed & MASK64))


def hash_tokens(tokens, seed: int) -> np.ndarray:
    """uint64 array of token_hash values, kernel-ready."""
    return np.array([token_hash(t, seed) for t in tokens], dtype=np.uint64)


def splitmix64_np(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 over a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        x = x + np.uint64(SPLITMIX_GAMMA)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))
