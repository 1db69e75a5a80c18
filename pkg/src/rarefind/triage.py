"""The discovery loop: embed a candidate sample with the reference set,
cluster, find where the reference set concentrates, and queue the densest
clusters for double review. Confirmed items grow the reference set for the
next round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Mapping, Sequence

import numpy as np

from . import cluster as cluster_mod
from .cluster import ClusterModel
from .embed import EmbeddingConfig, embed_corpus
from .errors import (
    EmptyReference,
    EmptySample,
    InsufficientCandidates,
    NoCandidates,
    TooFewReviewers,
    UnfinishedRound,
)
from .ingest import TokenizedDoc
from .lexicon import Lexicon, find_phrase_occurrences, match_with_proximity
from .store import IterationRecord, Project, ReferenceSet

__all__ = [
    "IterationConfig", "ReferenceSet", "IterationRecord", "RefDistribution",
    "ref_distribution", "select_clusters", "sample_for_review",
    "estimate_yield", "run_iteration", "should_stop",
    "compare_keyword_baseline", "BaselineComparison", "candidate_pool",
]


@dataclass
class IterationConfig:
    reviewers: list[str]
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    k: int = 12
    seed: int = 0
    n_per_round: int = 300
    selection: tuple = ("coverage", 0.8)  # or ("top_m", m)
    pool: str = "ip_matched"  # or "random"
    candidate_sample_size: int = 50_000
    yield_floor: float = 0.05
    max_iterations: int = 6
    preset: str = "light"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["embedding"] = self.embedding.to_dict()
        d["selection"] = list(self.selection)
        return d


@dataclass
class RefDistribution:
    fractions: dict[int, float]  # cluster -> share of clustered ref members
    clustered: int
    excluded: int  # ref members outside the clustered sample


def ref_distribution(model: ClusterModel, ref: ReferenceSet) -> RefDistribution:
    """Share of the (clustered) reference set landing in each cluster."""
    if not ref.members:
        raise EmptyReference("reference set is empty")
    counts: dict[int, int] = {}
    clustered = 0
    for cid in ref.members:
        assigned = model.assignments.get(cid)
        if assigned is None:
            continue
        clustered += 1
        counts[assigned] = counts.get(assigned, 0) + 1
    if clustered == 0:
        raise EmptyReference("no reference member was clustered")
    fractions = {c: n / clustered for c, n in sorted(counts.items())}
    return RefDistribution(fractions, clustered, len(ref.members) - clustered)


def select_clusters(dist: Mapping[int, float], strategy: tuple) -> list[int]:
    """top_m: the m largest fractions. coverage: the shortest descending
    prefix whose fractions sum to at least c. Ties favor the lower index."""
    if not dist:
        raise ValueError("empty distribution")
    ordered = sorted(dist, key=lambda c: (-dist[c], c))
    kind, arg = strategy
    if kind == "top_m":
        return ordered[:int(arg)]
    if kind == "coverage":
        out, total = [], 0.0
        for c in ordered:
            out.append(c)
            total += dist[c]
            if total >= arg:
                break
        return out
    raise ValueError(f"unknown selection strategy: {kind}")


def sample_for_review(model: ClusterModel, clusters: Sequence[int],
                      ref: ReferenceSet, n_per_round: int,
                      reviewers: Sequence[str], seed: int,
                      ) -> dict[str, list[str]]:
    """Seeded uniform sample (no replacement) of non-ref members of the
    selected clusters, each assigned two distinct reviewers with loads
    balanced to within one item."""
    if len(reviewers) < 2:
        raise TooFewReviewers("need at least 2 reviewers")
    if len(set(reviewers)) != len(reviewers):
        raise ValueError("duplicate reviewer ids")
    wanted = set(clusters)
    pool = sorted(cid for cid, c in model.assignments.items()
                  if c in wanted and cid not in ref.members)
    if len(pool) < n_per_round:
        raise InsufficientCandidates(
            f"{len(pool)} candidates available, need {n_per_round}")
    rng = np.random.Generator(np.random.PCG64(seed))
    picked = rng.choice(len(pool), size=n_per_round, replace=False)
    sample = [pool[i] for i in sorted(picked)]
    r = len(reviewers)
    return {cid: [reviewers[(2 * i) % r], reviewers[(2 * i + 1) % r]]
            for i, cid in enumerate(sample)}


def estimate_yield(sample_verdicts: Sequence[tuple[str, bool]]) -> float:
    """Relevant count over sample size."""
    if not sample_verdicts:
        raise EmptySample("no verdicts")
    return sum(1 for _, relevant in sample_verdicts if relevant) / len(sample_verdicts)


def candidate_pool(docs: Mapping[str, TokenizedDoc], lex: Lexicon,
                   pool: str = "ip_matched") -> list[str]:
    """Ids eligible for sampling: the paper's upper pipeline restricts to
    complaints containing at least one intimate-partner phrase."""
    if pool == "random":
        return sorted(docs)
    if pool != "ip_matched":
        raise ValueError(f"unknown pool: {pool}")
    out = []
    for cid, doc in docs.items():
        if find_phrase_occurrences(lex.normalize(doc.tokens), lex.ip_phrases):
            out.append(cid)
    return sorted(out)


def _iteration_seed(seed: int, iteration: int, stream: int) -> int:
    ss = np.random.SeedSequence((seed, iteration, stream))
    return int(ss.generate_state(1)[0])


def run_iteration(project: Project, cfg: IterationConfig,
                  force: bool = False) -> IterationRecord:
    """One pass of the loop: sample candidates, embed with the reference
    set, cluster, pick the ref-dense clusters, and open a review round.

    The round stays open until labels arrive and snapshot_refset seals it.
    Fully reproducible from (seed, cfg, ref version, candidate snapshot).
    """
    if project.open_iteration() is not None and not force:
        raise UnfinishedRound(
            f"iteration {project.open_iteration()} still has labels pending")
    ref = project.refset()
    if not ref.members:
        raise EmptyReference("seed the reference set before iterating")
    if project.lexicon is None:
        raise ValueError("project has no lexicon; run ingest first")

    iteration = project.last_iteration() + 1
    docs = project.tokenized(cfg.preset)
    pool = [cid for cid in candidate_pool(docs, project.lexicon, cfg.pool)
            if cid not in ref.members]
    if not pool:
        raise NoCandidates("no candidates outside the reference set")

    rng = np.random.Generator(
        np.random.PCG64(_iteration_seed(cfg.seed, iteration, 1)))
    if len(pool) > cfg.candidate_sample_size:
        picked = rng.choice(len(pool), size=cfg.candidate_sample_size,
                            replace=False)
        pool = [pool[i] for i in sorted(picked)]

    embed_ids = sorted(set(pool) | {cid for cid in ref.members if cid in docs})
    vectors = embed_corpus([docs[cid] for cid in embed_ids], cfg.embedding,
                           project.lexicon)
    model = cluster_mod.fit(vectors, k=cfg.k,
                            seed=_iteration_seed(cfg.seed, iteration, 2))

    dist = ref_distribution(model, ref)
    selected = select_clusters(dist.fractions, cfg.selection)
    override = project.manifest.get("configs", {}).get("selection_override")
    if override:
        # one-shot steering from the review UI's cluster explorer
        selected = [c for c in override if 0 <= c < cfg.k]
        project.manifest["configs"].pop("selection_override", None)
        project._save_manifest()
    assignments = sample_for_review(
        model, selected, ref, cfg.n_per_round, cfg.reviewers,
        seed=_iteration_seed(cfg.seed, iteration, 3))
    sampled = sorted(assignments)

    record = IterationRecord(
        iteration=iteration,
        embedding_cfg=cfg.embedding.to_dict(),
        k=cfg.k,
        seed=cfg.seed,
        ref_version_in=ref.version,
        ref_distribution=dist.fractions,
        ref_unclustered=dist.excluded,
        selected_clusters=selected,
        sampled=sampled,
        assignments=assignments,
        cluster_of={cid: model.assignments[cid] for cid in sampled},
        config=cfg.to_dict(),
    )
    project.save_model(iteration, model)
    project.write_iteration_record(record)
    return record


def should_stop(project: Project, cfg: IterationConfig) -> tuple[bool, str]:
    """Loop stop rule: max iterations reached, or the last sealed round's
    best estimated cluster yield fell under the floor."""
    records = [r for r in project.iteration_records() if r.status == "sealed"]
    if project.last_iteration() >= cfg.max_iterations:
        return True, f"max_iterations ({cfg.max_iterations}) reached"
    if records:
        last = records[-1]
        if last.estimated_yield:
            top = max(last.estimated_yield.values())
            if top < cfg.yield_floor:
                return True, (f"top cluster yield {top:.3f} below floor "
                              f"{cfg.yield_floor}")
    return False, ""


@dataclass
class BaselineComparison:
    both: int                 # found by the workflow and the proximity rule
    workflow_only: int        # only the workflow found these
    proximity_misses: int     # not matched by the proximity rule
    no_proximity_misses: int  # not matched even without proximity
    growth: float             # workflow_only / keyword-matched

    def to_json_dict(self) -> dict:
        return asdict(self)


def compare_keyword_baseline(final_ref: ReferenceSet, lex: Lexicon,
                             docs: Mapping[str, TokenizedDoc],
                             window: int = 10) -> BaselineComparison:
    """How much of the final reference set plain keyword matching would have
    found. growth is the fraction the workflow added on top of it."""
    both = prox_misses = noprox_misses = 0
    for cid in sorted(final_ref.members):
        doc = docs.get(cid)
        if doc is None:
            raise KeyError(f"reference member {cid} missing from corpus")
        if match_with_proximity(doc, lex, window).matched:
            both += 1
        else:
            prox_misses += 1
            if not match_with_proximity(doc, lex, math.inf).matched:
                noprox_misses += 1
    workflow_only = prox_misses
    growth = workflow_only / both if both else 0.0
    return BaselineComparison(both, workflow_only, prox_misses,
                              noprox_misses, growth)
