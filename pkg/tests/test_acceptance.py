"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. Runtime budgets from the
criteria are asserted on wall-clock time.
"""

import datetime as dt
import math
import random
import time

import numpy as np
import pytest

from rarefind.agreement import LabelMatrix, cohen_kappa, fleiss_kappa
from rarefind.cluster import fit
from rarefind.embed import EmbeddingConfig, EmbeddingVector
from rarefind.explain import (
    background_sample,
    class_tfidf,
    shapley_attribution,
    train_forest,
)
from rarefind.ingest import CleaningReport, Complaint, TokenizedDoc, clean
from rarefind.lexicon import Lexicon, match_with_proximity
from rarefind.store import Label, Project
from rarefind.triage import (
    IterationConfig,
    estimate_yield,
    run_iteration,
    select_clusters,
)


def ok(name):
    print(f"\nACCEPTANCE PASS [{name}]")


# --- 1. cleaning balance ------------------------------------------------------

class TestCleaningBalance:
    def test_cleaning_balance(self):
        start = time.time()

        # paper-scale arithmetic from a count stub
        report = CleaningReport.balanced(
            input_count=2_760_540,
            excluded_missing_narrative=1_786_680,
            excluded_duplicates=0)
        assert report.retained_count == 973_860

        rng = random.Random(20240601)
        texts = ["alpha beta gamma", "delta epsilon", "zeta eta theta iota",
                 "kappa", "lambda mu nu xi omicron"]
        for trial in range(1000):
            corpus = []
            for i in range(rng.randint(0, 14)):
                narrative = None if rng.random() < 0.3 else rng.choice(texts)
                corpus.append(Complaint(
                    complaint_id=f"{trial}-{i}",
                    date_received=dt.date(2022, 1, 1 + rng.randint(0, 2)),
                    narrative=narrative,
                    company=rng.choice("AB")))
            retained, report = clean(corpus)
            assert (report.retained_count == report.input_count
                    - report.excluded_missing_narrative
                    - report.excluded_duplicates)
            assert report.flagged_resubmissions <= report.retained_count
            twice, second = clean(retained)
            assert [c.complaint_id for c in twice] == \
                   [c.complaint_id for c in retained]
            assert second.excluded_duplicates == 0
            assert second.excluded_missing_narrative == 0

        elapsed = time.time() - start
        assert elapsed < 10, f"cleaning balance took {elapsed:.1f}s"
        ok(f"cleaning balance: 1000 corpora balanced + idempotent, "
           f"973,860 stub exact ({elapsed:.1f}s)")


# --- 2. proximity oracle ------------------------------------------------------

def naive_proximity_oracle(tokens, ip_phrases, abuse_phrases, window):
    """Definition-level O(n^2) scan, independent of the library path."""
    def occurrences(phrases):
        spans = []
        for p in phrases:
            for i in range(len(tokens) - len(p) + 1):
                if tuple(tokens[i:i + len(p)]) == p:
                    spans.append((i, i + len(p)))
        return spans

    hits = []
    for a in occurrences(ip_phrases):
        for b in occurrences(abuse_phrases):
            if a[1] <= b[0]:
                gap = b[0] - a[1]
            elif b[1] <= a[0]:
                gap = a[0] - b[1]
            else:
                gap = 0
            if gap <= window:
                hits.append((a, b, gap))
    return sorted(hits)


class TestProximityOracle:
    def test_proximity_oracle(self):
        start = time.time()
        lex = Lexicon.from_dict({
            "ip_phrases": ["ex husband", "wife", "partner"],
            "abuse_phrases": ["stole", "controlled", "domestic abuse"],
        })
        ip = sorted(lex.ip_phrases)
        abuse = sorted(lex.abuse_phrases)
        vocab = ["pad", "money", "ex", "husband", "wife", "partner", "stole",
                 "controlled", "domestic", "abuse", "account", "the"]
        rng = random.Random(7)
        windows = (0, 1, 10, math.inf)
        for i in range(1000):
            tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 90))]
            doc = TokenizedDoc(str(i), tokens, [(0, 1)] * len(tokens))
            matched_at = []
            for w in windows:
                got = match_with_proximity(doc, lex, w)
                expected = naive_proximity_oracle(tokens, ip, abuse, w)
                assert sorted(got.hits) == expected, (i, w)
                assert got.matched == bool(expected)
                matched_at.append(got.matched)
            for a, b in zip(matched_at, matched_at[1:]):
                assert (not a) or b, "window monotonicity violated"
        elapsed = time.time() - start
        assert elapsed < 30, f"proximity oracle took {elapsed:.1f}s"
        ok(f"proximity oracle: 1000 docs x windows {{0,1,10,inf}} agree with "
           f"O(n^2) scan; monotone ({elapsed:.1f}s)")


# --- 3. clustering optimality ---------------------------------------------------

def bruteforce_best_two_partition(x):
    best = -np.inf
    n = len(x)
    for mask in range(1, 2 ** (n - 1)):
        sel = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        obj = np.linalg.norm(x[sel].sum(0)) + np.linalg.norm(x[~sel].sum(0))
        best = max(best, obj)
    return best


def adjusted_rand_index(a, b):
    from collections import Counter
    from math import comb

    ab = Counter(zip(a, b))
    sum_ab = sum(comb(c, 2) for c in ab.values())
    sum_a = sum(comb(c, 2) for c in Counter(a).values())
    sum_b = sum(comb(c, 2) for c in Counter(b).values())
    n = len(a)
    expected = sum_a * sum_b / comb(n, 2)
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_ab - expected) / (max_index - expected)


class TestClusteringOptimality:
    def test_clustering_optimality(self):
        start = time.time()
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            n = int(rng.integers(2, 9))
            d = int(rng.integers(2, 6))
            x = rng.normal(size=(n, d))
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            vectors = [EmbeddingVector(str(i), d, row)
                       for i, row in enumerate(x)]
            model = fit(vectors, k=2, seed=trial)
            assert model.objective == pytest.approx(
                bruteforce_best_two_partition(x), abs=1e-6), f"trial {trial}"
            for a, b in zip(model.objective_history,
                            model.objective_history[1:]):
                assert b >= a - 1e-9, "objective decreased"

        recovered = 0
        for seed in range(10):
            rng = np.random.default_rng(term := 500 + seed)
            truth, vectors = [], []
            for i in range(12):
                axis = i % 3
                base = np.zeros(6)
                base[axis] = 1.0
                noisy = base + rng.normal(scale=0.05, size=6)
                noisy /= np.linalg.norm(noisy)
                vectors.append(EmbeddingVector(str(i), 6, noisy))
                truth.append(axis)
            model = fit(vectors, k=3, seed=seed)
            labels = [model.assignments[str(i)] for i in range(12)]
            if adjusted_rand_index(truth, labels) >= 0.95:
                recovered += 1
        assert recovered == 10, f"planted recovery failed in {10 - recovered} seeds"

        elapsed = time.time() - start
        assert elapsed < 60, f"clustering optimality took {elapsed:.1f}s"
        ok(f"clustering: 100 small corpora match brute force to 1e-6, "
           f"objective monotone, planted ARI>=0.95 in 10/10 seeds "
           f"({elapsed:.1f}s)")


# --- 4. yield / selection fixture ------------------------------------------------

class TestYieldSelectionFixture:
    def test_yield_selection_fixture(self):
        dist = {6: 0.49, 7: 0.22, 3: 0.13, 0: 0.05, 1: 0.04, 2: 0.04, 4: 0.03}
        assert select_clusters(dist, ("coverage", 0.80)) == [6, 7, 3]
        verdicts = ([(f"p{i}", True) for i in range(123)]
                    + [(f"n{i}", False) for i in range(377)])
        assert estimate_yield(verdicts) == 0.246
        ok("yield/selection: coverage(0.80) -> [C6,C7,C3]; 123/500 = 0.246 exact")


# --- 5. explainability ------------------------------------------------------------

class TestExplainability:
    def test_explainability(self):
        start = time.time()

        # c-TF-IDF hand fixture
        profiles = class_tfidf({0: ["debt", "debt", "card"],
                                1: ["phone", "call"]}, n_terms=3)
        w = dict(next(p for p in profiles if p.cluster == 0).terms)["debt"]
        assert w == pytest.approx(2 * math.log(1 + 2.5 / 2), abs=1e-9)
        assert w == pytest.approx(1.62186, abs=1e-5)

        # exact additivity on every instance of a 10-feature forest
        rng = np.random.default_rng(99)
        x = rng.normal(size=(40, 10))
        y = ((x[:, 0] + 0.7 * x[:, 3] - 0.4 * x[:, 7]) > 0).astype(int)
        forest = train_forest(x, y, n_trees=30, max_depth=6, seed=3)
        bg = background_sample(x, rows=25, seed=3)
        for i in range(x.shape[0]):
            base, phi = shapley_attribution(forest, x[i], 1, "exact", bg)
            prob = forest.predict_proba(x[i:i + 1])[0, forest.class_index(1)]
            assert base + phi.sum() == pytest.approx(prob, abs=1e-6), f"row {i}"

        # sampled vs exact on an 8-feature forest, 20 seeded trials
        x8 = rng.normal(size=(40, 8))
        y8 = ((x8[:, 1] - 0.5 * x8[:, 4]) > 0).astype(int)
        forest8 = train_forest(x8, y8, n_trees=25, max_depth=6, seed=4)
        bg8 = background_sample(x8, rows=15, seed=4)
        close = 0
        for seed in range(20):
            probe = x8[seed]
            _, exact_phi = shapley_attribution(forest8, probe, 1, "exact", bg8)
            _, sampled_phi = shapley_attribution(
                forest8, probe, 1, "sampled", bg8,
                n_permutations=2000, seed=seed)
            if np.max(np.abs(exact_phi - sampled_phi)) <= 0.05:
                close += 1
        assert close >= 19, f"sampled close to exact in only {close}/20 trials"

        elapsed = time.time() - start
        assert elapsed < 120, f"explainability took {elapsed:.1f}s"
        ok(f"explainability: c-TF-IDF 1e-9 fixture, exact additivity 1e-6 on "
           f"40 instances, sampled L-inf <= 0.05 in {close}/20 trials "
           f"({elapsed:.1f}s)")


# --- 6. agreement ------------------------------------------------------------------

class TestAgreement:
    def test_agreement(self):
        pairs = ([("yes", "yes")] * 20 + [("no", "no")] * 15
                 + [("yes", "no")] * 5 + [("no", "yes")] * 10)
        assert cohen_kappa(pairs) == pytest.approx(0.4, abs=1e-9)

        m = LabelMatrix(["a", "b", "c", "d"], ["x", "y"],
                        np.array([[2, 0], [2, 0], [0, 2], [1, 1]]),
                        raters_per_item=2)
        assert fleiss_kappa(m) == pytest.approx(0.46667, abs=1e-5)

        assert cohen_kappa([("a", "a"), ("b", "b")] * 5) == 1.0
        all_agree = LabelMatrix(["i1", "i2"], ["x", "y"],
                                np.array([[3, 0], [0, 3]]), 3)
        assert fleiss_kappa(all_agree) == 1.0

        rng = random.Random(424242)
        pairs = [(rng.choice("ab"), rng.choice("ab")) for _ in range(10_000)]
        assert abs(cohen_kappa(pairs)) <= 0.05
        ok("agreement: Cohen 0.4 exact, Fleiss 0.46667, perfect => 1.0, "
           "random |kappa| <= 0.05 at n=10,000")


# --- 7. end-to-end loop ---------------------------------------------------------------

TOPICS = {
    "credit": ["credit", "report", "bureau", "score", "inquiry", "dispute",
               "item", "remove", "late", "payment", "history", "accurate"],
    "debt": ["debt", "collector", "collection", "calls", "letter", "balance",
             "owe", "agency", "validation", "stop", "original", "creditor"],
    "mortgage": ["mortgage", "escrow", "servicer", "modification", "payment",
                 "interest", "insurance", "property", "taxes", "refinance"],
    "bank": ["checking", "savings", "deposit", "overdraft", "fee", "branch",
             "transfer", "statement", "balance", "charge"],
    "card": ["card", "charge", "billing", "statement", "merchant", "refund",
             "purchase", "limit", "annual", "fee", "rewards"],
}
LATENT = [f"sig{i:02d}" for i in range(25)]
IP_PHRASES = ["husband", "wife", "boyfriend", "girlfriend", "spouse"]
ABUSE_VERBS = ["stole", "hid", "controlled", "harassed", "exploited"]
NEUTRAL_VERBS = ["took", "moved", "handled", "kept", "managed"]


def generate_e2e_corpus(n_docs=50_000, positive_rate=0.02, seed=123,
                        omit_abuse_fraction=0.25):
    """Synthetic corpus mirroring the discovery problem's shape.

    2% positives carry an ip+abuse token signature plus a dense latent
    "relationship finance" vocabulary; a quarter of them omit abuse
    keywords entirely, so only the loop can find them. A same-sized slice
    of negatives shares the latent narrative style but describes shared,
    non-abusive finances in inclusive language (the we/our cluster-mates
    that keep real cluster yields well below 1). The rest is benign
    partner mentions and generic single-topic complaints."""
    rng = random.Random(seed)
    n_pos = int(n_docs * positive_rate)
    topics = list(TOPICS)
    complaints = []
    truth = {}

    def latent_run(n):
        return " ".join(rng.choice(LATENT) for _ in range(n))

    for i in range(n_docs):
        cid = f"c{i:06d}"
        topic_words = TOPICS[rng.choice(topics)]
        filler = " ".join(rng.choice(topic_words) for _ in range(25))
        short_filler = " ".join(filler.split()[:6])
        if i < n_pos:
            positive = True
            ip = rng.choice(IP_PHRASES)
            omit = rng.random() < omit_abuse_fraction
            verb = rng.choice(NEUTRAL_VERBS if omit else ABUSE_VERBS)
            text = (f"My ex {ip} {verb} money. {latent_run(18)}. "
                    f"{short_filler}.")
        else:
            positive = False
            r = rng.random()
            if r < 0.025:
                # shared-finance narratives: same latent style and nearly
                # the same wording, but no abuse and no prior partner
                ip = rng.choice(IP_PHRASES)
                verb = rng.choice(NEUTRAL_VERBS)
                text = (f"My {ip} {verb} money. {latent_run(18)}. "
                        f"{short_filler}.")
            elif r < 0.125:
                ip = rng.choice(IP_PHRASES)
                text = (f"My {ip} and I dispute a billing issue together. "
                        f"{filler}.")
            else:
                text = f"Complaint regarding {filler}."
        truth[cid] = positive
        complaints.append(Complaint(complaint_id=cid,
                                    date_received=dt.date(2022, 1, 1),
                                    narrative=text, company="BANK"))
    return complaints, truth


def auto_review(project, rec, truth):
    labels = []
    for cid in rec.sampled:
        verdict = "relevant" if truth[cid] else "not_relevant"
        for reviewer in rec.assignments[cid]:
            labels.append(Label(cid, reviewer, verdict, rec.iteration))
    project.append_labels(labels)


class TestEndToEndLoop:
    def test_end_to_end_loop(self, tmp_path):
        start = time.time()
        complaints, truth = generate_e2e_corpus()
        base_rate = sum(truth.values()) / len(truth)
        assert base_rate == pytest.approx(0.02, abs=1e-9)

        from rarefind.lexicon import default_lexicon
        project = Project.open(tmp_path / "e2e")
        try:
            project.set_corpus(complaints)
            project.set_lexicon(default_lexicon())

            # keyword round: proximity matches reviewed against the truth
            docs = project.tokenized("light")
            from rarefind.triage import candidate_pool
            pool = candidate_pool(docs, project.lexicon, "ip_matched")
            matched = [cid for cid in pool
                       if match_with_proximity(docs[cid], project.lexicon,
                                               10).matched]
            seeds = [cid for cid in matched if truth[cid]]
            assert seeds, "no proximity-matched positives to seed with"
            project.seed_reference(seeds)
            ref_sizes = [len(project.refset().members)]

            cfg = IterationConfig(reviewers=["r1", "r2"], seed=20240601)
            top_yields = []
            workflow_found_unmatched = 0
            for _ in range(2):
                rec = run_iteration(project, cfg)
                auto_review(project, rec, truth)
                project.snapshot_refset()
                sealed = project.iteration_record(rec.iteration)
                ref_sizes.append(len(project.refset().members))
                top = sealed.selected_clusters[0]
                top_yields.append(sealed.estimated_yield.get(top, 0.0))
                for cid in sealed.confirmed:
                    if not match_with_proximity(docs[cid], project.lexicon,
                                                10).matched:
                        workflow_found_unmatched += 1

            # (a) monotone reference growth
            for a, b in zip(ref_sizes, ref_sizes[1:]):
                assert b >= a, f"reference set shrank: {ref_sizes}"
            assert ref_sizes[-1] > ref_sizes[0], "no growth over two rounds"

            # (b) top-cluster estimated yield at least 5x the base rate
            assert top_yields[0] >= 5 * base_rate, (
                f"top cluster yield {top_yields[0]:.3f} < "
                f"{5 * base_rate:.3f}; yields {top_yields}")

            # (c) the loop confirmed positives the proximity rule misses
            assert workflow_found_unmatched >= 1
        finally:
            project.close()

        elapsed = time.time() - start
        assert elapsed < 300, f"end-to-end loop took {elapsed:.1f}s"
        ok(f"end-to-end: ref {ref_sizes[0]} -> {ref_sizes[-1]}, top-cluster "
           f"yields {[f'{y:.2f}' for y in top_yields]} vs base {base_rate}, "
           f"{workflow_found_unmatched} confirmed positives unmatched by "
           f"keywords ({elapsed:.1f}s)")


# --- 8. determinism ---------------------------------------------------------------------

class TestDeterminism:
    def run_pipeline(self, root, complaints, truth):
        from rarefind.lexicon import default_lexicon
        project = Project.open(root)
        try:
            project.set_corpus(complaints)
            project.set_lexicon(default_lexicon())
            docs = project.tokenized("light")
            matched = [cid for cid in sorted(docs)
                       if match_with_proximity(docs[cid], project.lexicon,
                                               10).matched]
            project.seed_reference([cid for cid in matched if truth[cid]])
            cfg = IterationConfig(
                reviewers=["r1", "r2"], seed=7,
                embedding=EmbeddingConfig(dims=256),
                k=4, n_per_round=20, candidate_sample_size=2000)
            for _ in range(2):
                rec = run_iteration(project, cfg)
                auto_review(project, rec, truth)
                project.snapshot_refset()
            return project.export_text().encode()
        finally:
            project.close()

    def test_pinned_seed_byte_identical_exports(self, tmp_path):
        complaints, truth = generate_e2e_corpus(n_docs=1500,
                                                positive_rate=0.05, seed=9)
        a = self.run_pipeline(tmp_path / "a", complaints, truth)
        b = self.run_pipeline(tmp_path / "b", complaints, truth)
        assert a == b
        ok("determinism: two pinned-seed runs export byte-identical projects")
