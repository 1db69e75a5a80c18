#!/usr/bin/env python3
"""Build a small review project and serve it for the UI round-trip tests.

Layout when the server comes up:
  round 1: sealed (6 items fully labeled: 2 relevant, 3 not, 1 unsure)
  round 2: open, 12 items assigned to (ana, ben); the first sampled item is
           pre-labeled into a dispute (ana: relevant, ben: not_relevant),
           leaving ana a queue of 11.
"""

import argparse
import datetime as dt
import random
import sys
import tempfile

import uvicorn

from rarefind.api import create_app
from rarefind.embed import EmbeddingConfig
from rarefind.ingest import Complaint
from rarefind.lexicon import default_lexicon
from rarefind.store import Label, Project
from rarefind.triage import IterationConfig, run_iteration

LATENT = ["latenta", "latentb", "secret", "pattern", "signal"]
GENERIC = ["billing", "card", "fees", "loan", "report", "score", "bank"]


def build_corpus(n=160, planted=30):
    rng = random.Random(11)
    complaints = []
    for i in range(n):
        cid = f"{i:04d}"
        if i < planted:
            latent = " ".join(rng.choice(LATENT) for _ in range(8))
            verb = "stole" if i % 4 != 3 else "took"
            text = f"My ex husband {verb} money from me. Then {latent} again."
        elif i < planted + 60:
            filler = " ".join(rng.choice(GENERIC) for _ in range(10))
            text = f"My wife and I dispute a fee. About {filler}."
        else:
            filler = " ".join(rng.choice(GENERIC) for _ in range(12))
            text = f"Generic complaint about {filler}."
        complaints.append(Complaint(complaint_id=cid,
                                    date_received=dt.date(2022, 1, 1),
                                    narrative=text, company="BANK"))
    return complaints


def build_project(root):
    project = Project.open(root)
    project.set_corpus(build_corpus())
    project.set_lexicon(default_lexicon())
    project.seed_reference([f"{i:04d}" for i in range(8)])

    cfg = IterationConfig(
        reviewers=["ana", "ben"],
        embedding=EmbeddingConfig(dims=64),
        k=3, seed=5, n_per_round=6,
        selection=("coverage", 0.8),
        candidate_sample_size=1000)

    # round 1: complete and seal
    rec = run_iteration(project, cfg)
    verdicts = (["relevant"] * 2 + ["not_relevant"] * 3 + ["unsure"])
    labels = []
    for cid, verdict in zip(rec.sampled, verdicts):
        for reviewer in rec.assignments[cid]:
            labels.append(Label(cid, reviewer, verdict, rec.iteration))
    project.append_labels(labels)
    project.snapshot_refset()

    # round 2: open, with one pre-labeled dispute
    cfg2 = IterationConfig(
        reviewers=["ana", "ben"],
        embedding=EmbeddingConfig(dims=64),
        k=3, seed=6, n_per_round=12,
        selection=("coverage", 0.8),
        candidate_sample_size=1000)
    rec2 = run_iteration(project, cfg2)
    dispute = rec2.sampled[0]
    project.append_labels([
        Label(dispute, "ana", "relevant", rec2.iteration),
        Label(dispute, "ben", "not_relevant", rec2.iteration),
    ])
    return project


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--root", default=None)
    args = parser.parse_args()

    root = args.root or tempfile.mkdtemp(prefix="rarefind-ui-fixture-")
    project = build_project(root)
    print(f"FIXTURE READY root={root}", flush=True)
    try:
        uvicorn.run(create_app(project), host="127.0.0.1", port=args.port,
                    log_level="warning")
    finally:
        project.close()


if __name__ == "__main__":
    sys.exit(main())
