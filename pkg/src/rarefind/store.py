"""Durable project state under a single directory.

Everything is structured text: newline-delimited JSON for the label log,
single-document JSON for manifest, corpus, lexicon, models, reference-set
snapshots and iteration records. The label log is the audit trail: the
current reference set is reproducible by replaying it. A manifest maps
every sealed artifact to its sha256 and is checked on open. One writer
per project, enforced with a lock file.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    ClosedRound,
    CorruptManifest,
    LockedByAnotherProcess,
    NoCompletedRound,
    UnknownComplaint,
)
from .ingest import CleaningReport, Complaint, TokenizedDoc, tokenize
from .lexicon import Lexicon

FORMAT_VERSION = 1

# The eight high-level coding categories reviewers may tag.
FRAMEWORK_CATEGORIES = (
    "relationship_status",
    "financial_product_service",
    "type_of_financial_abuse",
    "point_of_discovery",
    "methods_of_resolution",
    "barriers_to_help",
    "consequences_of_financial_abuse",
    "intimate_threat",
)

VERDICTS = ("relevant", "not_relevant", "unsure")

SEED_ROUND = 0
SEED_REVIEWER = "seed"
GROUP_REVIEWER = "group"


@dataclass
class Label:
    complaint_id: str
    reviewer_id: str
    verdict: str
    iteration: int
    timestamp: Optional[str] = None  # UTC ISO-8601; excluded from determinism
    note: Optional[str] = None
    framework_tags: Optional[list[str]] = None
    adjudication: bool = False

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"invalid verdict: {self.verdict!r}")
        if self.framework_tags:
            bad = set(self.framework_tags) - set(FRAMEWORK_CATEGORIES)
            if bad:
                raise ValueError(f"unknown framework tag(s): {sorted(bad)}")

    def to_record(self) -> dict:
        rec = {"complaint_id": self.complaint_id,
               "reviewer_id": self.reviewer_id,
               "verdict": self.verdict,
               "iteration": self.iteration,
               "timestamp": self.timestamp}
        if self.note:
            rec["note"] = self.note
        if self.framework_tags:
            rec["framework_tags"] = sorted(self.framework_tags)
        if self.adjudication:
            rec["adjudication"] = True
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Label":
        return cls(complaint_id=rec["complaint_id"],
                   reviewer_id=rec["reviewer_id"],
                   verdict=rec["verdict"],
                   iteration=rec["iteration"],
                   timestamp=rec.get("timestamp"),
                   note=rec.get("note"),
                   framework_tags=rec.get("framework_tags"),
                   adjudication=rec.get("adjudication", False))


@dataclass
class ReferenceSet:
    """Versioned, append-only set of confirmed positives."""

    version: int
    members: frozenset[str]
    provenance: dict[str, dict]  # cid -> {"source": ..., "reviewers": [...]}

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "version": self.version,
            "members": sorted(self.members),
            "provenance": {cid: self.provenance[cid]
                           for cid in sorted(self.provenance)},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ReferenceSet":
        return cls(version=d["version"], members=frozenset(d["members"]),
                   provenance=dict(d["provenance"]))


@dataclass
class IterationRecord:
    """Everything one loop iteration did, sealed once its round completes."""

    iteration: int
    embedding_cfg: dict
    k: int
    seed: int
    ref_version_in: int
    ref_distribution: dict[int, float]
    ref_unclustered: int
    selected_clusters: list[int]
    sampled: list[str]
    assignments: dict[str, list[str]]
    cluster_of: dict[str, int]
    config: dict = field(default_factory=dict)
    status: str = "open"
    confirmed: list[str] = field(default_factory=list)
    estimated_yield: dict[int, float] = field(default_factory=dict)
    ref_version_out: Optional[int] = None

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "iteration": self.iteration,
            "embedding_cfg": self.embedding_cfg,
            "k": self.k,
            "seed": self.seed,
            "ref_version_in": self.ref_version_in,
            "ref_distribution": {str(c): repr(f)
                                 for c, f in sorted(self.ref_distribution.items())},
            "ref_unclustered": self.ref_unclustered,
            "selected_clusters": self.selected_clusters,
            "sampled": self.sampled,
            "assignments": {cid: self.assignments[cid]
                            for cid in sorted(self.assignments)},
            "cluster_of": {cid: self.cluster_of[cid]
                           for cid in sorted(self.cluster_of)},
            "config": self.config,
            "status": self.status,
            "confirmed": sorted(self.confirmed),
            "estimated_yield": {str(c): repr(f)
                                for c, f in sorted(self.estimated_yield.items())},
            "ref_version_out": self.ref_version_out,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "IterationRecord":
        return cls(
            iteration=d["iteration"],
            embedding_cfg=d["embedding_cfg"],
            k=d["k"],
            seed=d["seed"],
            ref_version_in=d["ref_version_in"],
            ref_distribution={int(c): float(f)
                              for c, f in d["ref_distribution"].items()},
            ref_unclustered=d["ref_unclustered"],
            selected_clusters=list(d["selected_clusters"]),
            sampled=list(d["sampled"]),
            assignments=dict(d["assignments"]),
            cluster_of=dict(d["cluster_of"]),
            config=d.get("config", {}),
            status=d["status"],
            confirmed=list(d["confirmed"]),
            estimated_yield={int(c): float(f)
                             for c, f in d["estimated_yield"].items()},
            ref_version_out=d["ref_version_out"],
        )


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(path: Path, doc: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class Project:
    """Single-writer project handle. Use as a context manager or close()."""

    MANIFEST = "manifest.json"
    CORPUS = "corpus.jsonl"
    CLEANING_REPORT = "cleaning_report.json"
    LEXICON = "lexicon.json"
    LABEL_LOG = "labels.log"
    LOCK = "lock"

    def __init__(self, root: Path):
        self.root = Path(root)
        self.manifest: dict = {}
        self.complaints: dict[str, Complaint] = {}
        self.lexicon: Optional[Lexicon] = None
        self.cleaning_report: Optional[dict] = None
        self.labels: list[Label] = []
        self._token_cache: dict[str, dict[str, TokenizedDoc]] = {}
        self._lock_fd: Optional[int] = None

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def open(cls, root, create: bool = True) -> "Project":
        project = cls(Path(root))
        root = project.root
        fresh = not (root / cls.MANIFEST).exists()
        if fresh and not create:
            raise FileNotFoundError(f"no project at {root}")
        root.mkdir(parents=True, exist_ok=True)
        (root / "refsets").mkdir(exist_ok=True)
        (root / "models").mkdir(exist_ok=True)
        (root / "iterations").mkdir(exist_ok=True)
        project._acquire_lock()
        try:
            if fresh:
                project.manifest = {
                    "format_version": FORMAT_VERSION,
                    "created": utc_now_iso(),
                    "artifacts": {},
                    "configs": {},
                }
                project._write_refset(ReferenceSet(0, frozenset(), {}))
                project._save_manifest()
            project._load()
        except Exception:
            project._release_lock()
            raise
        return project

    def close(self) -> None:
        self._release_lock()

    def __enter__(self) -> "Project":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _acquire_lock(self) -> None:
        path = self.root / self.LOCK
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockedByAnotherProcess(
                f"{path} exists; another process owns this project "
                f"(rarefind unlock to force)") from None
        os.write(fd, str(os.getpid()).encode())
        self._lock_fd = fd

    def _release_lock(self) -> None:
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            self._lock_fd = None
            try:
                os.unlink(self.root / self.LOCK)
            except FileNotFoundError:
                pass

    @staticmethod
    def force_unlock(root) -> None:
        try:
            os.unlink(Path(root) / Project.LOCK)
        except FileNotFoundError:
            pass

    # -- manifest / integrity -----------------------------------------------

    def _save_manifest(self) -> None:
        _dump_json(self.root / self.MANIFEST, self.manifest)

    def _record_artifact(self, relpath: str) -> None:
        self.manifest["artifacts"][relpath] = _sha256(self.root / relpath)
        self._save_manifest()

    def _verify_integrity(self) -> None:
        for relpath, expected in self.manifest.get("artifacts", {}).items():
            path = self.root / relpath
            if not path.exists():
                raise CorruptManifest(f"artifact missing: {relpath}")
            actual = _sha256(path)
            if actual != expected:
                raise CorruptManifest(
                    f"artifact hash mismatch: {relpath} "
                    f"(expected {expected[:12]}, found {actual[:12]})")

    def _load(self) -> None:
        with open(self.root / self.MANIFEST, encoding="utf-8") as f:
            self.manifest = json.load(f)
        self._verify_integrity()
        corpus_path = self.root / self.CORPUS
        if corpus_path.exists():
            self.complaints = {}
            with open(corpus_path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        c = Complaint.from_record(json.loads(line))
                        self.complaints[c.complaint_id] = c
        report_path = self.root / self.CLEANING_REPORT
        if report_path.exists():
            with open(report_path, encoding="utf-8") as f:
                self.cleaning_report = json.load(f)
        lex_path = self.root / self.LEXICON
        if lex_path.exists():
            with open(lex_path, encoding="utf-8") as f:
                self.lexicon = Lexicon.from_dict(json.load(f))
        self.labels = self._replay_log()

    # -- corpus / lexicon ----------------------------------------------------

    def set_corpus(self, complaints: Sequence[Complaint],
                   report: Optional[CleaningReport] = None) -> None:
        path = self.root / self.CORPUS
        ordered = sorted(complaints, key=lambda c: c.complaint_id)
        with open(path, "w", encoding="utf-8") as f:
            for c in ordered:
                f.write(json.dumps(c.to_record(), sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())
        self.complaints = {c.complaint_id: c for c in ordered}
        self._token_cache.clear()
        self._record_artifact(self.CORPUS)
        self.manifest["corpus_hash"] = self.manifest["artifacts"][self.CORPUS]
        if report is not None:
            _dump_json(self.root / self.CLEANING_REPORT, report.to_json_dict())
            self.cleaning_report = report.to_json_dict()
            self._record_artifact(self.CLEANING_REPORT)
        self._save_manifest()

    def set_lexicon(self, lex: Lexicon) -> None:
        _dump_json(self.root / self.LEXICON, lex.to_dict())
        self.lexicon = lex
        self._record_artifact(self.LEXICON)

    def tokenized(self, preset: str = "light") -> dict[str, TokenizedDoc]:
        """Tokenize the corpus once per preset (deterministic, so not stored)."""
        cache = self._token_cache.get(preset)
        if cache is None:
            cache = {cid: tokenize(c.narrative, preset, complaint_id=cid)
                     for cid, c in self.complaints.items()
                     if c.narrative}
            self._token_cache[preset] = cache
        return cache

    # -- label log -------------------------------------------------------------

    def _replay_log(self) -> list[Label]:
        path = self.root / self.LABEL_LOG
        labels: list[Label] = []
        if not path.exists():
            return labels
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    batch = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn tail write: ignore the incomplete batch
                labels.extend(Label.from_record(r) for r in batch["labels"])
        return labels

    def append_labels(self, labels: Sequence[Label]) -> int:
        """Atomic batch append; returns the new log offset (total labels)."""
        if not labels:
            return len(self.labels)
        for lab in labels:
            if lab.complaint_id not in self.complaints:
                raise UnknownComplaint(
                    f"unknown complaint_id: {lab.complaint_id}")
            self._check_round_open(lab.iteration)
            if lab.timestamp is None:
                lab.timestamp = utc_now_iso()
        line = json.dumps({"labels": [lab.to_record() for lab in labels]},
                          sort_keys=True)
        with open(self.root / self.LABEL_LOG, "a", encoding="utf-8") as f:
            f.write(line + "\n")
            f.flush()
            os.fsync(f.fileno())
        self.labels.extend(labels)
        return len(self.labels)

    def _check_round_open(self, iteration: int) -> None:
        if iteration == SEED_ROUND:
            if self.refset_version() > 0:
                raise ClosedRound("the seed round closed when the reference "
                                  "set was first snapshotted")
            return
        rec = self.iteration_record(iteration)
        if rec is None:
            raise ClosedRound(f"no round open for iteration {iteration}")
        if rec.status != "open":
            raise ClosedRound(f"iteration {iteration} is sealed")

    def resolved_labels(self, iteration: int) -> dict[str, dict[str, str]]:
        """Live verdict per (complaint, reviewer) for a round; later appends
        supersede earlier ones. Adjudications are kept apart."""
        out: dict[str, dict[str, str]] = {}
        for lab in self.labels:
            if lab.iteration != iteration or lab.adjudication:
                continue
            out.setdefault(lab.complaint_id, {})[lab.reviewer_id] = lab.verdict
        return out

    def adjudicated(self, iteration: int) -> dict[str, str]:
        out: dict[str, str] = {}
        for lab in self.labels:
            if lab.iteration == iteration and lab.adjudication:
                out[lab.complaint_id] = lab.verdict
        return out

    def final_verdicts(self, iteration: int) -> dict[str, Optional[str]]:
        """Final verdict per sampled item: the adjudicated verdict if any,
        else the agreed two-reviewer verdict, else None (pending)."""
        rec = self.iteration_record(iteration)
        if rec is None:
            raise ClosedRound(f"no such iteration: {iteration}")
        by_item = self.resolved_labels(iteration)
        adjudications = self.adjudicated(iteration)
        out: dict[str, Optional[str]] = {}
        for cid in rec.sampled:
            if cid in adjudications:
                out[cid] = adjudications[cid]
                continue
            verdicts = [by_item.get(cid, {}).get(r)
                        for r in rec.assignments[cid]]
            if all(v is not None for v in verdicts) and len(set(verdicts)) == 1:
                out[cid] = verdicts[0]
            else:
                out[cid] = None
        return out

    # -- reference set ------------------------------------------------------------

    def refset_version(self) -> int:
        versions = [int(p.stem[1:]) for p in (self.root / "refsets").glob("v*.json")]
        return max(versions) if versions else 0

    def refset(self, version: Optional[int] = None) -> ReferenceSet:
        if version is None:
            version = self.refset_version()
        path = self.root / "refsets" / f"v{version:04d}.json"
        if not path.exists():
            raise FileNotFoundError(f"no reference set version {version}")
        with open(path, encoding="utf-8") as f:
            return ReferenceSet.from_json_dict(json.load(f))

    def _write_refset(self, refset: ReferenceSet) -> None:
        rel = f"refsets/v{refset.version:04d}.json"
        _dump_json(self.root / rel, refset.to_json_dict())
        self.manifest.setdefault("artifacts", {})
        self._record_artifact(rel)

    def seed_reference(self, member_ids: Iterable[str],
                       reviewer: str = SEED_REVIEWER) -> ReferenceSet:
        """Create reference set v1 from keyword-round confirmations.

        Seeds flow through the label log (round 0) so replaying the log
        reconstructs every version.
        """
        member_ids = sorted(set(member_ids))
        labels = [Label(cid, reviewer, "relevant", SEED_ROUND)
                  for cid in member_ids]
        self.append_labels(labels)
        prev = self.refset()
        members = prev.members | set(member_ids)
        provenance = dict(prev.provenance)
        for cid in member_ids:
            provenance[cid] = {"source": "keyword_round", "reviewers": [reviewer]}
        refset = ReferenceSet(prev.version + 1, frozenset(members), provenance)
        self._write_refset(refset)
        return refset

    def snapshot_refset(self) -> ReferenceSet:
        """Fold the completed open round's confirmations into a new version."""
        open_iter = self.open_iteration()
        if open_iter is None:
            raise NoCompletedRound("no open round to snapshot")
        rec = self.iteration_record(open_iter)
        finals = self.final_verdicts(open_iter)
        pending = sorted(cid for cid, v in finals.items() if v is None)
        if pending:
            raise NoCompletedRound(
                f"round {open_iter} has {len(pending)} unresolved item(s): "
                + ", ".join(pending[:5]))

        confirmed = sorted(cid for cid, v in finals.items() if v == "relevant")
        prev = self.refset()
        members = prev.members | set(confirmed)
        provenance = dict(prev.provenance)
        for cid in confirmed:
            provenance[cid] = {"source": f"iteration:{open_iter}",
                               "reviewers": rec.assignments[cid]}
        refset = ReferenceSet(prev.version + 1, frozenset(members), provenance)
        self._write_refset(refset)

        sampled_by_cluster: dict[int, int] = {}
        confirmed_by_cluster: dict[int, int] = {}
        for cid in rec.sampled:
            c = rec.cluster_of[cid]
            sampled_by_cluster[c] = sampled_by_cluster.get(c, 0) + 1
            if finals[cid] == "relevant":
                confirmed_by_cluster[c] = confirmed_by_cluster.get(c, 0) + 1
        rec.estimated_yield = {
            c: confirmed_by_cluster.get(c, 0) / n
            for c, n in sorted(sampled_by_cluster.items())}
        rec.confirmed = confirmed
        rec.status = "sealed"
        rec.ref_version_out = refset.version
        self.write_iteration_record(rec)
        return refset

    def reconstruct_members_from_log(self) -> frozenset[str]:
        """Replay-only view of the current members: seed-round relevants plus
        every sealed round's final-relevant items."""
        members: set[str] = set()
        for lab in self.labels:
            if lab.iteration == SEED_ROUND and lab.verdict == "relevant":
                members.add(lab.complaint_id)
        for rec in self.iteration_records():
            if rec.status != "sealed":
                continue
            finals = self.final_verdicts(rec.iteration)
            members.update(cid for cid, v in finals.items() if v == "relevant")
        return frozenset(members)

    # -- iteration records -----------------------------------------------------------

    def iteration_record(self, iteration: int) -> Optional[IterationRecord]:
        path = self.root / "iterations" / f"iter{iteration:04d}.json"
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as f:
            return IterationRecord.from_json_dict(json.load(f))

    def iteration_records(self) -> list[IterationRecord]:
        records = []
        for path in sorted((self.root / "iterations").glob("iter*.json")):
            with open(path, encoding="utf-8") as f:
                records.append(IterationRecord.from_json_dict(json.load(f)))
        return records

    def write_iteration_record(self, rec: IterationRecord) -> None:
        rel = f"iterations/iter{rec.iteration:04d}.json"
        _dump_json(self.root / rel, rec.to_json_dict())
        self._record_artifact(rel)

    def open_iteration(self) -> Optional[int]:
        for rec in self.iteration_records():
            if rec.status == "open":
                return rec.iteration
        return None

    def last_iteration(self) -> int:
        records = self.iteration_records()
        return max((r.iteration for r in records), default=0)

    def save_model(self, iteration: int, model) -> None:
        rel = f"models/iter{iteration:04d}.json"
        model.save(self.root / rel)
        self._record_artifact(rel)

    def load_model(self, iteration: int):
        from .cluster import ClusterModel
        return ClusterModel.load(self.root / "models" / f"iter{iteration:04d}.json")

    # -- export -------------------------------------------------------------------

    def export(self) -> dict:
        """Canonical project dump with timestamps stripped (diffable)."""
        labels = []
        for lab in self.labels:
            rec = lab.to_record()
            rec.pop("timestamp", None)
            labels.append(rec)
        refsets = []
        for version in range(self.refset_version() + 1):
            try:
                refsets.append(self.refset(version).to_json_dict())
            except FileNotFoundError:
                continue
        return {
            "format_version": FORMAT_VERSION,
            "corpus": [self.complaints[cid].to_record()
                       for cid in sorted(self.complaints)],
            "cleaning_report": self.cleaning_report,
            "lexicon": self.lexicon.to_dict() if self.lexicon else None,
            "labels": labels,
            "refsets": refsets,
            "iterations": [r.to_json_dict() for r in self.iteration_records()],
        }

    def export_text(self) -> str:
        return json.dumps(self.export(), sort_keys=True, indent=1) + "\n"
