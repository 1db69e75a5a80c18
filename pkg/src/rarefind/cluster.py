"""Spherical k-means over unit vectors.

Assignment maximizes cosine similarity; centroids are renormalized means.
Seeding is k-means++ adapted to cosine distance (1 - cos). Multiple
seeded restarts guard against poor local optima; the count adapts to the
input size so tiny inputs (where the acceptance suite compares against
the brute-force global optimum) get more restarts than 50k-doc corpora.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .embed import EmbeddingVector
from .errors import DimensionMismatch, NonUnitInput, TooFewPoints

UNIT_TOL = 1e-6
RESTARTS_SMALL = 10
RESTARTS_LARGE = 3
RESTART_CUTOFF = 2048  # points


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, dims), rows unit-norm
    assignments: dict[str, int]
    objective: float
    iterations_run: int
    seed: int
    objective_history: list[float] = field(default_factory=list)

    @property
    def dims(self) -> int:
        return self.centroids.shape[1]

    def cluster_members(self) -> dict[int, list[str]]:
        members: dict[int, list[str]] = {j: [] for j in range(self.k)}
        for cid in sorted(self.assignments):
            members[self.assignments[cid]].append(cid)
        return members

    def to_json_dict(self) -> dict:
        return {
            "format_version": 1,
            "k": self.k,
            "seed": self.seed,
            "objective": repr(self.objective),
            "iterations_run": self.iterations_run,
            "objective_history": [repr(x) for x in self.objective_history],
            "centroids": [[repr(float(x)) for x in row] for row in self.centroids],
            "assignments": dict(sorted(self.assignments.items())),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ClusterModel":
        return cls(
            k=d["k"],
            centroids=np.array([[float(x) for x in row] for row in d["centroids"]]),
            assignments=dict(d["assignments"]),
            objective=float(d["objective"]),
            iterations_run=d["iterations_run"],
            seed=d["seed"],
            objective_history=[float(x) for x in d.get("objective_history", [])],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, sort_keys=True, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path, encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))


def _as_matrix(vectors: Sequence[EmbeddingVector]) -> tuple[np.ndarray, list[str]]:
    if not vectors:
        raise TooFewPoints("no vectors")
    dims = vectors[0].dims
    x = np.empty((len(vectors), dims))
    ids = []
    for i, v in enumerate(vectors):
        if v.dims != dims or len(v.values) != dims:
            raise DimensionMismatch(
                f"vector {v.complaint_id} has dims {v.dims}, expected {dims}")
        x[i] = v.values
        ids.append(v.complaint_id)
    norms = np.linalg.norm(x, axis=1)
    bad = np.where(np.abs(norms - 1.0) > UNIT_TOL)[0]
    if bad.size:
        raise NonUnitInput(
            f"{bad.size} vector(s) are not unit-norm (first: {ids[bad[0]]})")
    return x, ids


def _plusplus_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ over cosine distance: D(x) = 1 - max cos to chosen seeds."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    best_cos = x @ x[chosen[0]]
    for _ in range(1, k):
        d = np.clip(1.0 - best_cos, 0.0, None)
        d[chosen] = 0.0
        total = d.sum()
        if total <= 0.0:
            # All remaining points coincide with a seed; take the lowest
            # unchosen index for determinism.
            taken = set(chosen)
            nxt = next(i for i in range(n) if i not in taken)
        else:
            # Sample proportionally to D^2 via inverse CDF on one uniform
            # draw per seed (reproducible).
            w = d * d
            cum = np.cumsum(w)
            u = rng.random() * cum[-1]
            nxt = min(int(np.searchsorted(cum, u, side="right")), n - 1)
        chosen.append(nxt)
        best_cos = np.maximum(best_cos, x @ x[nxt])
    return x[chosen].copy()


def _fix_empty_clusters(x, centroids, labels, sims, k) -> None:
    """Re-seed each empty cluster from the currently worst-assigned point.

    The moved point becomes its cluster's centroid (cosine 1), so final
    assignments stay optimal and the objective cannot decrease.
    """
    for j in range(k):
        if not np.any(labels == j):
            worst = int(np.argmin(sims))
            centroids[j] = x[worst]
            labels[worst] = j
            sims[worst] = 1.0


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iters: int, tol: float,
           ) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    k = centroids.shape[0]
    labels, sims = _kernels.assign_points(x, centroids)
    _fix_empty_clusters(x, centroids, labels, sims, k)
    prev_objective = -np.inf
    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iters + 1):
        sums = _kernels.accumulate_centroids(x, labels, k)
        norms = np.linalg.norm(sums, axis=1)
        for j in range(k):
            if norms[j] > 0.0:
                centroids[j] = sums[j] / norms[j]

        labels, sims = _kernels.assign_points(x, centroids)
        _fix_empty_clusters(x, centroids, labels, sims, k)

        objective = float(sims.sum())
        history.append(objective)
        if objective - prev_objective < tol:
            prev_objective = objective
            break
        prev_objective = objective
    return labels, centroids, prev_objective, iterations, history


EXHAUSTIVE_SEED_LIMIT = 256  # max C(n, k) for full seed-combination coverage
EXHAUSTIVE_PARTITION_LIMIT = 12  # max n for the full 2-partition scan


def _seed_combinations(n: int, k: int):
    if math.comb(n, k) > EXHAUSTIVE_SEED_LIMIT:
        return None
    return itertools.combinations(range(n), k)


def _best_two_partition_centroids(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    best_obj, best_mask = -np.inf, 1
    for mask in range(1, 2 ** (n - 1)):
        sel = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        obj = (np.linalg.norm(x[sel].sum(axis=0))
               + np.linalg.norm(x[~sel].sum(axis=0)))
        if obj > best_obj:
            best_obj, best_mask = obj, mask
    sel = np.array([(best_mask >> i) & 1 for i in range(n)], dtype=bool)
    centroids = np.vstack([x[sel].sum(axis=0), x[~sel].sum(axis=0)])
    norms = np.linalg.norm(centroids, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return centroids / norms


def fit(vectors: Sequence[EmbeddingVector], k: int, seed: int = 0,
        max_iters: int = 100, tol: float = 1e-6,
        n_init: int | None = None) -> ClusterModel:
    """Fit spherical k-means; deterministic given (vectors, k, seed).

    n_init defaults to 10 restarts for up to 2048 points and 3 beyond; the
    best-objective restart wins (ties: first). Tiny inputs additionally run
    Lloyd from every distinct seed combination (at most 256 of them), which
    keeps small corpora at the brute-force optimum deterministically.
    """
    x, ids = _as_matrix(vectors)
    n = x.shape[0]
    if k < 1 or k > n:
        raise TooFewPoints(f"need at least k={k} vectors, got {n}")
    if n_init is None:
        n_init = RESTARTS_SMALL if n <= RESTART_CUTOFF else RESTARTS_LARGE

    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.Generator(np.random.PCG64(child))
        centroids = _plusplus_seeds(x, k, rng)
        labels, centroids, objective, iters, history = _lloyd(
            x, centroids, max_iters, tol)
        if best is None or objective > best[2]:
            best = (labels, centroids, objective, iters, history)

    combos = _seed_combinations(n, k)
    if combos is not None:
        for combo in combos:
            labels, centroids, objective, iters, history = _lloyd(
                x, x[list(combo)].copy(), max_iters, tol)
            if objective > best[2]:
                best = (labels, centroids, objective, iters, history)

    if k == 2 and n <= EXHAUSTIVE_PARTITION_LIMIT:
        # Lloyd from point seeds can miss the best 2-partition outright;
        # tiny inputs are cheap enough to scan every partition and polish
        # the winner (a global optimum is always Lloyd-stable).
        centroids = _best_two_partition_centroids(x)
        labels, centroids, objective, iters, history = _lloyd(
            x, centroids, max_iters, tol)
        if objective > best[2]:
            best = (labels, centroids, objective, iters, history)

    labels, centroids, objective, iters, history = best
    assignments = {cid: int(labels[i]) for i, cid in enumerate(ids)}
    return ClusterModel(k=k, centroids=centroids, assignments=assignments,
                        objective=objective, iterations_run=iters, seed=seed,
                        objective_history=history)


def assign(model: ClusterModel, v: EmbeddingVector) -> int:
    """Out-of-sample assignment: max-cosine centroid, ties to lowest index."""
    if v.dims != model.dims or len(v.values) != model.dims:
        raise DimensionMismatch(
            f"vector dims {v.dims} != model dims {model.dims}")
    sims = model.centroids @ v.values
    return int(np.argmax(sims))


def recompute_objective(model: ClusterModel,
                        vectors: Sequence[EmbeddingVector]) -> float:
    """Independent re-evaluation of the stored objective."""
    by_id = {v.complaint_id: v for v in vectors}
    total = 0.0
    for cid, j in model.assignments.items():
        total += float(np.dot(by_id[cid].values, model.centroids[j]))
    return total
