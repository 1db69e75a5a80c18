"""Cluster explainability: class-TFIDF term profiles and Shapley word
attributions from a from-scratch random forest.

The forest predicts a document's cluster from its TF-IDF vector; Shapley
values then say which words push a document toward or away from the
target cluster. Attribution is model-agnostic: the value of a coalition
is the mean prediction over background rows with the out-of-coalition
features replaced by the background's values. Exact enumeration is used
for small active-feature counts (where additivity is checked to machine
precision); permutation sampling covers the rest.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyBackground,
    EmptyClass,
    SingleClass,
    TooManyFeaturesForExact,
)
from .ingest import TokenizedDoc

logger = logging.getLogger(__name__)

EXACT_FEATURE_LIMIT = 12
DEFAULT_BACKGROUND_ROWS = 100


# --- class-based TF-IDF -------------------------------------------------------

@dataclass
class ClusterTopicProfile:
    cluster: int
    terms: list[tuple[str, float]]  # (term, score), scores non-increasing
    n_terms: int

    def to_json_dict(self) -> dict:
        return {"cluster": self.cluster, "n_terms": self.n_terms,
                "terms": [[t, s] for t, s in self.terms]}


def class_tfidf(clusters: dict[int, Sequence[str]], n_terms: int = 20,
                ) -> list[ClusterTopicProfile]:
    """Score terms per class: W(t,c) = tf(t,c) * ln(1 + A / f(t)).

    tf(t,c) counts t inside class c's concatenated tokens, A is the mean
    token count per (non-empty) class and f(t) is t's total count across
    classes. Natural log, BERTopic-style. Empty classes are skipped with
    a warning.
    """
    nonempty = {}
    for label in sorted(clusters):
        tokens = clusters[label]
        if tokens:
            nonempty[label] = tokens
        else:
            logger.warning("class %s has no tokens; skipped", label)
    if len(nonempty) < 2:
        raise EmptyClass("need at least 2 classes with tokens")

    counts: dict[int, dict[str, int]] = {}
    totals: dict[str, int] = {}
    for label, tokens in nonempty.items():
        c: dict[str, int] = {}
        for t in tokens:
            c[t] = c.get(t, 0) + 1
        counts[label] = c
        for t, n in c.items():
            totals[t] = totals.get(t, 0) + n

    mean_class_tokens = sum(len(t) for t in nonempty.values()) / len(nonempty)
    profiles = []
    for label, c in counts.items():
        scored = [(t, n * math.log(1.0 + mean_class_tokens / totals[t]))
                  for t, n in c.items()]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        profiles.append(ClusterTopicProfile(label, scored[:n_terms], n_terms))
    return profiles


# --- per-document TF-IDF -------------------------------------------------------

def tfidf_vectors(docs: Sequence[TokenizedDoc], vocab_cap: int = 500,
                  ) -> tuple[np.ndarray, list[str]]:
    """Dense TF-IDF rows over the top-df unigrams and bigrams.

    tf = raw count / token count of the document; idf = ln((1+N)/(1+df)) + 1.
    Rows are left unnormalized (the forest downstream is scale-tolerant).
    """
    if not docs:
        raise ValueError("docs must be non-empty")
    df: dict[str, int] = {}
    per_doc: list[dict[str, int]] = []
    for doc in docs:
        grams: dict[str, int] = {}
        toks = doc.tokens
        for t in toks:
            grams[t] = grams.get(t, 0) + 1
        for i in range(len(toks) - 1):
            g = toks[i] + " " + toks[i + 1]
            grams[g] = grams.get(g, 0) + 1
        per_doc.append(grams)
        for g in grams:
            df[g] = df.get(g, 0) + 1

    features = sorted(df, key=lambda t: (-df[t], t))[:vocab_cap]
    index = {t: i for i, t in enumerate(features)}
    n = len(docs)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in features])

    x = np.zeros((n, len(features)))
    for row, (doc, grams) in enumerate(zip(docs, per_doc)):
        length = len(doc.tokens)
        if length == 0:
            continue
        for g, c in grams.items():
            col = index.get(g)
            if col is not None:
                x[row, col] = (c / length) * idf[col]
    return x, features


# --- random forest -------------------------------------------------------------

@dataclass
class _Tree:
    feature: np.ndarray    # int64, -1 marks a leaf
    threshold: np.ndarray  # float64
    left: np.ndarray       # int64 child node ids
    right: np.ndarray
    probs: np.ndarray      # (n_nodes, n_classes), meaningful at leaves

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        nodes = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[nodes]
            active = feat >= 0
            if not active.any():
                break
            idx = np.where(active)[0]
            go_left = x[idx, feat[idx]] <= self.threshold[nodes[idx]]
            nodes[idx] = np.where(go_left, self.left[nodes[idx]],
                                  self.right[nodes[idx]])
        return self.probs[nodes]

    def to_json_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [repr(float(t)) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "probs": [[repr(float(p)) for p in row] for row in self.probs],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "_Tree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array([float(t) for t in d["threshold"]]),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            probs=np.array([[float(p) for p in row] for row in d["probs"]]),
        )


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float((p * p).sum())


class _TreeBuilder:
    def __init__(self, x, y_idx, n_classes, max_depth, n_split_features, rng):
        self.x = x
        self.y = y_idx
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.n_split_features = n_split_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.probs: list[np.ndarray] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.probs.append(np.zeros(self.n_classes))
        return len(self.feature) - 1

    def _leaf(self, node: int, idx: np.ndarray) -> None:
        counts = np.bincount(self.y[idx], minlength=self.n_classes).astype(float)
        self.probs[node] = counts / counts.sum()

    def build(self, idx: np.ndarray, depth: int = 0) -> int:
        node = self._new_node()
        counts = np.bincount(self.y[idx], minlength=self.n_classes)
        if (depth >= self.max_depth or len(idx) < 2
                or np.count_nonzero(counts) == 1):
            self._leaf(node, idx)
            return node

        parent_gini = _gini(counts.astype(float))
        n_features = self.x.shape[1]
        candidates = self.rng.choice(n_features, size=self.n_split_features,
                                     replace=False)
        best = None  # (weighted_gini, feature, threshold)
        for f in candidates:
            v = self.x[idx, f]
            order = np.argsort(v, kind="stable")
            sv = v[order]
            sy = self.y[idx][order]
            if sv[0] == sv[-1]:
                continue
            onehot = np.zeros((len(idx), self.n_classes))
            onehot[np.arange(len(idx)), sy] = 1.0
            cum = np.cumsum(onehot, axis=0)
            total = cum[-1]
            # split after position p keeps rows 0..p on the left
            valid = np.where(sv[:-1] < sv[1:])[0]
            if valid.size == 0:
                continue
            nl = (valid + 1).astype(float)
            nr = len(idx) - nl
            pl = cum[valid] / nl[:, None]
            pr = (total - cum[valid]) / nr[:, None]
            gl = 1.0 - (pl * pl).sum(axis=1)
            gr = 1.0 - (pr * pr).sum(axis=1)
            weighted = (nl * gl + nr * gr) / len(idx)
            p = int(np.argmin(weighted))
            w = float(weighted[p])
            if (best is None or w < best[0]) and w < parent_gini - 1e-12:
                thr = (sv[valid[p]] + sv[valid[p] + 1]) / 2.0
                best = (w, int(f), thr)

        if best is None:
            self._leaf(node, idx)
            return node

        _, f, thr = best
        go_left = self.x[idx, f] <= thr
        left_id = self.build(idx[go_left], depth + 1)
        right_id = self.build(idx[~go_left], depth + 1)
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = left_id
        self.right[node] = right_id
        return node

    def finish(self) -> _Tree:
        return _Tree(np.array(self.feature, dtype=np.int64),
                     np.array(self.threshold),
                     np.array(self.left, dtype=np.int64),
                     np.array(self.right, dtype=np.int64),
                     np.vstack(self.probs))


@dataclass
class ForestModel:
    trees: list[_Tree]
    classes: list[int]
    n_trees: int
    max_depth: int
    seed: int
    feature_names: list[str] = field(default_factory=list)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acc = np.zeros((x.shape[0], len(self.classes)))
        for tree in self.trees:
            acc += tree.predict_proba(x)
        return acc / len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray:
        probs = self.predict_proba(x)
        return np.array([self.classes[i] for i in probs.argmax(axis=1)])

    def class_index(self, label) -> int:
        return self.classes.index(label)

    def to_json_dict(self) -> dict:
        return {
            "format_version": 1,
            "classes": self.classes,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "feature_names": self.feature_names,
            "trees": [t.to_json_dict() for t in self.trees],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ForestModel":
        return cls(trees=[_Tree.from_json_dict(t) for t in d["trees"]],
                   classes=d["classes"], n_trees=d["n_trees"],
                   max_depth=d["max_depth"], seed=d["seed"],
                   feature_names=d.get("feature_names", []))

    def serialize(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def train_forest(x: np.ndarray, y: Sequence[int], n_trees: int = 100,
                 max_depth: int = 12, seed: int = 0,
                 feature_names: Optional[list[str]] = None) -> ForestModel:
    """Bootstrap-bagged Gini trees with sqrt(F) features per split."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    classes = sorted(set(int(v) for v in y))
    if len(classes) < 2:
        raise SingleClass("training labels contain a single class")
    class_index = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([class_index[int(v)] for v in y])

    n, n_features = x.shape
    n_split = max(1, int(round(math.sqrt(n_features))))
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.Generator(np.random.PCG64(child))
        boot = rng.integers(0, n, size=n)
        builder = _TreeBuilder(x[boot], y_idx[boot], len(classes), max_depth,
                               n_split, rng)
        builder.build(np.arange(n))
        trees.append(builder.finish())
    return ForestModel(trees=trees, classes=classes, n_trees=n_trees,
                       max_depth=max_depth, seed=seed,
                       feature_names=feature_names or [])


# --- Shapley attribution -------------------------------------------------------

class _CoalitionValues:
    """Memoized v(S) over bitmasks of `active` features, evaluated in
    batched predict_proba calls (one call can cover hundreds of masks)."""

    CHUNK = 512  # masks per predict call

    def __init__(self, model: ForestModel, x: np.ndarray, target_idx: int,
                 background: np.ndarray, active: np.ndarray):
        self.model = model
        self.x = x
        self.target_idx = target_idx
        self.background = background
        self.active = active
        self.memo: dict[int, float] = {}

    def ensure(self, masks) -> None:
        pending = [m for m in dict.fromkeys(masks) if m not in self.memo]
        b = self.background.shape[0]
        for start in range(0, len(pending), self.CHUNK):
            chunk = pending[start:start + self.CHUNK]
            rows = np.tile(self.x, (len(chunk) * b, 1))
            for i, mask in enumerate(chunk):
                block = rows[i * b:(i + 1) * b]
                for bit, f in enumerate(self.active):
                    if not mask & (1 << bit):
                        block[:, f] = self.background[:, f]
            probs = self.model.predict_proba(rows)[:, self.target_idx]
            for i, mask in enumerate(chunk):
                self.memo[mask] = float(probs[i * b:(i + 1) * b].mean())

    def __call__(self, mask: int) -> float:
        if mask not in self.memo:
            self.ensure([mask])
        return self.memo[mask]


def shapley_attribution(model: ForestModel, x: np.ndarray, target_cluster: int,
                        mode: str = "exact",
                        background: Optional[np.ndarray] = None,
                        n_permutations: int = 2000, seed: int = 0,
                        features: Optional[Sequence[int]] = None,
                        ) -> tuple[float, np.ndarray]:
    """Shapley values of the target-cluster probability for one instance.

    v(S) = mean over background rows of P(target | x on S, background
    elsewhere); features equal to the background mean are inactive and
    pinned to x everywhere, so base_value + sum(phi) equals the model's
    probability at x exactly in exact mode.

    `features` optionally restricts attribution to a subset; everything
    outside it is held at the instance's values (explanation context),
    which preserves exact additivity over the subset.
    """
    if background is None or len(background) == 0:
        raise EmptyBackground("background matrix is required")
    background = np.asarray(background, dtype=float)
    x = np.asarray(x, dtype=float)
    target_idx = model.class_index(target_cluster)

    bg_mean = background.mean(axis=0)
    active = np.where(~np.isclose(x, bg_mean, rtol=0.0, atol=1e-12))[0]
    if features is not None:
        wanted = set(int(f) for f in features)
        active = np.array([f for f in active if f in wanted], dtype=np.int64)
    m = len(active)
    phi = np.zeros(x.shape[0])
    value = _CoalitionValues(model, x, target_idx, background, active)
    base = value(0)
    if m == 0:
        return base, phi

    if mode == "exact":
        if m > EXACT_FEATURE_LIMIT:
            raise TooManyFeaturesForExact(
                f"{m} active features exceed the exact limit of "
                f"{EXACT_FEATURE_LIMIT}; use sampled mode")
        value.ensure(range(1 << m))
        weights = [factorial(s) * factorial(m - 1 - s) / factorial(m)
                   for s in range(m)]
        for mask in range(1 << m):
            size = bin(mask).count("1")
            if size == m:
                continue
            v_s = value(mask)
            w = weights[size]
            for bit in range(m):
                if not mask & (1 << bit):
                    phi[active[bit]] += w * (value(mask | (1 << bit)) - v_s)
        return base, phi

    if mode == "sampled":
        rng = np.random.Generator(np.random.PCG64(seed))
        perms = [rng.permutation(m) for _ in range(n_permutations)]
        masks = [0]
        for perm in perms:
            mask = 0
            for bit in perm:
                mask |= 1 << int(bit)
                masks.append(mask)
        value.ensure(masks)
        acc = np.zeros(m)
        for perm in perms:
            mask = 0
            prev = value(0)
            for bit in perm:
                mask |= 1 << int(bit)
                cur = value(mask)
                acc[bit] += cur - prev
                prev = cur
        for bit in range(m):
            phi[active[bit]] = acc[bit] / n_permutations
        return base, phi

    raise ValueError(f"unknown mode: {mode}")


def background_sample(x: np.ndarray, rows: int = DEFAULT_BACKGROUND_ROWS,
                      seed: int = 0) -> np.ndarray:
    """Seeded background sample of the training matrix."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = x.shape[0]
    if n <= rows:
        return np.asarray(x, dtype=float).copy()
    idx = rng.choice(n, size=rows, replace=False)
    return np.asarray(x, dtype=float)[np.sort(idx)]


# --- attribution report ---------------------------------------------------------

@dataclass
class AttributionReport:
    target_cluster: int
    per_instance: dict[str, tuple[float, np.ndarray]]  # cid -> (base, phi)
    summary_topk: list[tuple[str, float, float]]  # (feature, mean|phi|, sign profile)

    def to_json_dict(self, feature_names: list[str]) -> dict:
        inst = {}
        for cid, (base, phi) in sorted(self.per_instance.items()):
            nz = {feature_names[i]: repr(float(p))
                  for i, p in enumerate(phi) if p != 0.0}
            inst[cid] = {"base_value": repr(float(base)), "phi": nz}
        return {
            "target_cluster": self.target_cluster,
            "per_instance": inst,
            "summary_topk": [[f, repr(float(a)), repr(float(s))]
                             for f, a, s in self.summary_topk],
        }


def attribution_summary(per_instance: dict[str, tuple[float, np.ndarray]],
                        feature_names: Sequence[str], k: int = 20,
                        ) -> list[tuple[str, float, float]]:
    """Rank features by mean |phi|; carry the fraction of instances with
    phi > 0 so negatively influential words stay identifiable."""
    if not per_instance:
        raise ValueError("need at least one instance attribution")
    phis = np.vstack([phi for _, phi in per_instance.values()])
    mean_abs = np.abs(phis).mean(axis=0)
    sign_profile = (phis > 0).mean(axis=0)
    order = sorted(range(len(feature_names)),
                   key=lambda i: (-mean_abs[i], feature_names[i]))
    return [(feature_names[i], float(mean_abs[i]), float(sign_profile[i]))
            for i in order[:k]]


def explain_cluster(docs: Sequence[TokenizedDoc], assignments: dict[str, int],
                    target_cluster: int, vocab_cap: int = 500,
                    n_trees: int = 100, max_depth: int = 12, seed: int = 0,
                    n_instances: int = 25, mode: str = "sampled",
                    n_permutations: int = 500,
                    features_per_instance: int = 32,
                    ) -> tuple[ForestModel, AttributionReport]:
    """End-to-end: TF-IDF -> forest -> Shapley summary for one cluster.

    Attribution runs over each document's own strongest words (its largest
    TF-IDF entries, capped at features_per_instance): word explanations
    are about the words a complaint contains.
    """
    docs = [d for d in docs if d.complaint_id in assignments]
    x, names = tfidf_vectors(docs, vocab_cap)
    y = [assignments[d.complaint_id] for d in docs]
    forest = train_forest(x, y, n_trees=n_trees, max_depth=max_depth,
                          seed=seed, feature_names=names)
    bg = background_sample(x, seed=seed)

    members = [i for i, d in enumerate(docs)
               if assignments[d.complaint_id] == target_cluster]
    rng = np.random.Generator(np.random.PCG64(seed))
    if len(members) > n_instances:
        members = [members[i] for i in
                   np.sort(rng.choice(len(members), n_instances, replace=False))]
    per_instance = {}
    for i in members:
        present = np.where(x[i] != 0.0)[0]
        if len(present) > features_per_instance:
            order = np.argsort(-np.abs(x[i][present]), kind="stable")
            present = present[order[:features_per_instance]]
        base, phi = shapley_attribution(
            forest, x[i], target_cluster, mode=mode, background=bg,
            n_permutations=n_permutations, seed=seed, features=present)
        per_instance[docs[i].complaint_id] = (base, phi)
    summary = attribution_summary(per_instance, names)
    return forest, AttributionReport(target_cluster, per_instance, summary)
