import datetime as dt

import numpy as np
import pytest

from rarefind.cluster import ClusterModel
from rarefind.embed import EmbeddingConfig
from rarefind.errors import (
    EmptyReference,
    EmptySample,
    InsufficientCandidates,
    NoCandidates,
    TooFewReviewers,
    UnfinishedRound,
)
from rarefind.ingest import Complaint, TokenizedDoc
from rarefind.lexicon import Lexicon, default_lexicon
from rarefind.store import Label, Project, ReferenceSet
from rarefind.triage import (
    IterationConfig,
    compare_keyword_baseline,
    estimate_yield,
    ref_distribution,
    run_iteration,
    sample_for_review,
    select_clusters,
    should_stop,
)


def fake_model(assignments, k=12):
    return ClusterModel(k=k, centroids=np.eye(k), assignments=assignments,
                        objective=0.0, iterations_run=1, seed=0)


def refset(members):
    return ReferenceSet(1, frozenset(members), {})


class TestRefDistribution:
    def test_paper_shaped_distribution(self):
        assignments = {}
        i = 0
        for cluster, count in ((6, 49), (7, 22), (3, 13), (0, 16)):
            for _ in range(count):
                assignments[f"r{i}"] = cluster
                i += 1
        dist = ref_distribution(fake_model(assignments),
                                refset(assignments.keys()))
        assert dist.fractions[6] == pytest.approx(0.49)
        assert dist.fractions[7] == pytest.approx(0.22)
        assert dist.fractions[3] == pytest.approx(0.13)
        assert sum(dist.fractions.values()) == pytest.approx(1.0, abs=1e-9)

    def test_all_in_one_cluster(self):
        dist = ref_distribution(fake_model({"a": 4, "b": 4}), refset(["a", "b"]))
        assert dist.fractions == {4: 1.0}

    def test_uniform_hand_count(self):
        assignments = {f"m{i}": i // 2 for i in range(10)}
        dist = ref_distribution(fake_model(assignments), refset(assignments))
        assert all(f == pytest.approx(0.2) for f in dist.fractions.values())

    def test_members_outside_sample_counted_separately(self):
        dist = ref_distribution(fake_model({"a": 0}), refset(["a", "ghost"]))
        assert dist.clustered == 1
        assert dist.excluded == 1

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            ref_distribution(fake_model({"a": 0}), refset([]))


class TestSelectClusters:
    def test_paper_coverage_fixture(self):
        dist = {6: 0.49, 7: 0.22, 3: 0.13, 0: 0.06, 1: 0.05, 2: 0.05}
        assert select_clusters(dist, ("coverage", 0.80)) == [6, 7, 3]

    def test_top_m(self):
        assert select_clusters({0: 0.6, 1: 0.4}, ("top_m", 1)) == [0]

    def test_tie_lower_index_wins(self):
        assert select_clusters({5: 0.5, 2: 0.5}, ("top_m", 1)) == [2]

    def test_coverage_minimality(self):
        dist = {0: 0.4, 1: 0.3, 2: 0.2, 3: 0.1}
        out = select_clusters(dist, ("coverage", 0.6))
        assert sum(dist[c] for c in out) >= 0.6
        assert sum(dist[c] for c in out[:-1]) < 0.6

    def test_coverage_above_total_returns_all(self):
        assert select_clusters({0: 0.5, 1: 0.5}, ("coverage", 2.0)) == [0, 1]


class TestSampleForReview:
    def model_with_candidates(self, n=10):
        assignments = {f"c{i:02d}": 0 for i in range(n)}
        assignments.update({f"x{i}": 1 for i in range(3)})
        return fake_model(assignments, k=2)

    def test_two_reviewers_cover_everything(self):
        got = sample_for_review(self.model_with_candidates(), [0], refset([]),
                                4, ["a", "b"], seed=1)
        assert len(got) == 4
        assert all(sorted(v) == ["a", "b"] for v in got.values())

    def test_five_reviewers_balanced(self):
        got = sample_for_review(self.model_with_candidates(), [0], refset([]),
                                10, list("abcde"), seed=2)
        loads = {}
        for pair in got.values():
            assert len(set(pair)) == 2
            for r in pair:
                loads[r] = loads.get(r, 0) + 1
        assert set(loads.values()) == {4}

    def test_seed_determinism(self):
        a = sample_for_review(self.model_with_candidates(), [0], refset([]),
                              4, ["a", "b"], seed=3)
        b = sample_for_review(self.model_with_candidates(), [0], refset([]),
                              4, ["a", "b"], seed=3)
        assert a == b

    def test_ref_members_excluded(self):
        ref = refset(["c00", "c01"])
        got = sample_for_review(self.model_with_candidates(), [0], ref,
                                8, ["a", "b"], seed=4)
        assert not set(got) & ref.members

    def test_insufficient_candidates(self):
        with pytest.raises(InsufficientCandidates):
            sample_for_review(self.model_with_candidates(3), [0], refset([]),
                              10, ["a", "b"], seed=5)

    def test_too_few_reviewers(self):
        with pytest.raises(TooFewReviewers):
            sample_for_review(self.model_with_candidates(), [0], refset([]),
                              2, ["solo"], seed=6)


class TestEstimateYield:
    def test_paper_fixture(self):
        verdicts = ([(f"c{i}", True) for i in range(123)]
                    + [(f"n{i}", False) for i in range(377)])
        assert estimate_yield(verdicts) == 0.246

    def test_zero(self):
        assert estimate_yield([("a", False)] * 10) == 0.0

    def test_quarter(self):
        verdicts = [("x", True)] * 7 + [("y", False)] * 21
        assert estimate_yield(verdicts) == 0.25

    def test_empty(self):
        with pytest.raises(EmptySample):
            estimate_yield([])


def tdoc(cid, text):
    tokens = text.split()
    return TokenizedDoc(cid, tokens, [(0, 1)] * len(tokens))


class TestCompareKeywordBaseline:
    def lex(self):
        return Lexicon.from_dict({"ip_phrases": ["husband"],
                                  "abuse_phrases": ["stole"]})

    def test_all_keyword_seeded_growth_zero(self):
        docs = {f"{i}": tdoc(f"{i}", "my husband stole it") for i in range(5)}
        out = compare_keyword_baseline(refset(docs), self.lex(), docs)
        assert out.workflow_only == 0
        assert out.growth == 0.0
        assert out.both == 5

    def test_synthetic_misses(self):
        docs = {
            "1": tdoc("1", "my husband stole it"),
            "2": tdoc("2", "husband " + "pad " * 20 + "stole it"),  # far apart
            "3": tdoc("3", "husband was unkind"),                   # no abuse
            "4": tdoc("4", "money just vanished"),                  # neither
            "5": tdoc("5", "husband here " + "pad " * 15 + "stole"),
            "6": tdoc("6", "husband kept control of nothing"),      # no abuse kw
        }
        out = compare_keyword_baseline(refset(docs), self.lex(), docs, window=10)
        assert out.proximity_misses == 5  # only "1" matches at window 10
        assert out.no_proximity_misses == 3  # "3", "4", "6" have no abuse word
        assert out.both == 1
        assert out.growth == 5.0

    def test_verified_against_direct_matching(self):
        from rarefind.lexicon import match_with_proximity
        lex = self.lex()
        docs = {str(i): tdoc(str(i), t) for i, t in enumerate([
            "my husband stole it",
            "husband " + "x " * 12 + "stole",
            "stole something",
            "husband only",
        ])}
        out = compare_keyword_baseline(refset(docs), lex, docs, window=10)
        direct = sum(1 for d in docs.values()
                     if not match_with_proximity(d, lex, 10).matched)
        assert out.proximity_misses == direct


def build_project(tmp_path, n_docs=80, planted=12):
    """Tiny corpus: planted positives share ip+abuse phrases plus a latent
    vocabulary; some negatives mention a partner innocently so the
    ip-matched candidate pool is wider than the positives."""
    rng = np.random.default_rng(0)
    latent = ["latenta", "latentb", "secret", "pattern", "signature"]
    generic = ["billing", "card", "fees", "loan", "report", "score", "bank"]
    complaints = []
    for i in range(n_docs):
        cid = f"{i:03d}"
        if i < planted:
            extra = " ".join(rng.choice(latent, size=6))
            text = f"My ex husband stole money. Then {extra} again {extra}."
        elif i < planted + 30:
            filler = " ".join(rng.choice(generic, size=10))
            text = f"My husband and I dispute a fee. About {filler}."
        else:
            filler = " ".join(rng.choice(generic, size=12))
            text = f"Generic complaint about {filler}."
        complaints.append(Complaint(complaint_id=cid,
                                    date_received=dt.date(2022, 1, 1),
                                    narrative=text, company="B"))
    project = Project.open(tmp_path / "proj")
    project.set_corpus(complaints)
    project.set_lexicon(default_lexicon())
    return project


def small_cfg(**kw):
    defaults = dict(
        reviewers=["a", "b"],
        embedding=EmbeddingConfig(dims=64),
        k=3, seed=7, n_per_round=5,
        selection=("coverage", 0.8),
        candidate_sample_size=1000,
        max_iterations=3,
    )
    defaults.update(kw)
    return IterationConfig(**defaults)


class TestRunIteration:
    def test_round_lifecycle_and_ref_growth(self, tmp_path):
        project = build_project(tmp_path, planted=20)
        try:
            project.seed_reference([f"{i:03d}" for i in range(6)])
            cfg = small_cfg()
            rec = run_iteration(project, cfg)
            assert rec.iteration == 1
            assert rec.status == "open"
            assert len(rec.sampled) == 5
            assert not set(rec.sampled) & project.refset().members
            assert sum(rec.ref_distribution.values()) == pytest.approx(1.0)

            # cannot start another round while this one is pending
            with pytest.raises(UnfinishedRound):
                run_iteration(project, cfg)

            # auto-review with the planted truth: ids < 020 are positives
            labels = []
            for cid in rec.sampled:
                verdict = "relevant" if int(cid) < 20 else "not_relevant"
                for reviewer in rec.assignments[cid]:
                    labels.append(Label(cid, reviewer, verdict, rec.iteration))
            project.append_labels(labels)
            refset_out = project.snapshot_refset()
            assert refset_out.version == 2
            assert project.refset().members >= set(f"{i:03d}" for i in range(6))

            rec2 = run_iteration(project, cfg)
            assert rec2.iteration == 2
            assert rec2.ref_version_in == 2
        finally:
            project.close()

    def test_reproducible_record(self, tmp_path):
        p1 = build_project(tmp_path / "a")
        p2 = build_project(tmp_path / "b")
        try:
            for p in (p1, p2):
                p.seed_reference([f"{i:03d}" for i in range(6)])
            r1 = run_iteration(p1, small_cfg())
            r2 = run_iteration(p2, small_cfg())
            assert r1.sampled == r2.sampled
            assert r1.assignments == r2.assignments
            assert r1.ref_distribution == r2.ref_distribution
        finally:
            p1.close()
            p2.close()

    def test_requires_reference(self, tmp_path):
        project = build_project(tmp_path)
        try:
            with pytest.raises(EmptyReference):
                run_iteration(project, small_cfg())
        finally:
            project.close()

    def test_no_candidates(self, tmp_path):
        # every ip-matched doc is already in the reference set
        project = build_project(tmp_path, n_docs=12, planted=12)
        try:
            project.seed_reference([f"{i:03d}" for i in range(12)])
            with pytest.raises(NoCandidates):
                run_iteration(project, small_cfg())
        finally:
            project.close()

    def test_should_stop_on_max_iterations(self, tmp_path):
        project = build_project(tmp_path)
        try:
            project.seed_reference([f"{i:03d}" for i in range(6)])
            cfg = small_cfg(max_iterations=1)
            rec = run_iteration(project, cfg)
            labels = []
            for cid in rec.sampled:
                for reviewer in rec.assignments[cid]:
                    labels.append(Label(cid, reviewer, "not_relevant", 1))
            project.append_labels(labels)
            project.snapshot_refset()
            stop, reason = should_stop(project, cfg)
            assert stop and "max_iterations" in reason
        finally:
            project.close()
