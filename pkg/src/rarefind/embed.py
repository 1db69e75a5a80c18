"""Unit-norm document vectors from pluggable, deterministic providers.

Transformer encoders are deliberately not bundled: vectors computed
elsewhere can be imported from a plain text file, and two self-contained
providers (seeded hashed n-grams, seeded TF-IDF random projection) keep
the loop runnable offline. Every provider ends with L2 normalization, the
requirement spherical clustering relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from ._hashing import SPLITMIX_GAMMA, hash_tokens, splitmix64_np, token_hash
from .errors import DimensionMismatch, DuplicateId, EmptyVocabulary, MissingId
from .ingest import TokenizedDoc
from .lexicon import Lexicon, MatchResult, find_phrase_occurrences

PROVIDERS = ("hashed_ngrams", "tfidf_projection", "external_file")
WINDOW_MODES = ("full_doc", "ip_window")


@dataclass
class EmbeddingVector:
    complaint_id: str
    dims: int
    values: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass
class EmbeddingConfig:
    provider: str = "hashed_ngrams"
    dims: int = 4096
    seed: int = 42
    ngram_range: tuple[int, int] = (1, 2)
    window_mode: str = "full_doc"
    window_sentences: int = 5

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise ValueError(f"unknown provider: {self.provider}")
        if self.dims < 2:
            raise ValueError("dims must be >= 2")
        nmin, nmax = self.ngram_range
        if not (1 <= nmin <= nmax):
            raise ValueError(f"bad ngram_range: {self.ngram_range}")
        if self.window_mode not in WINDOW_MODES:
            raise ValueError(f"unknown window_mode: {self.window_mode}")
        if self.window_sentences < 1:
            raise ValueError("window_sentences must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ngram_range"] = list(self.ngram_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingConfig":
        d = dict(d)
        if "ngram_range" in d:
            d["ngram_range"] = tuple(d["ngram_range"])
        return cls(**d)


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def _fallback_unit(complaint_id: str, dims: int, seed: int) -> np.ndarray:
    # Token-less documents still need a deterministic unit vector.
    v = np.zeros(dims)
    v[token_hash(complaint_id, seed) % dims] = 1.0
    return v


def apply_window(doc: TokenizedDoc, hits: Optional[MatchResult],
                 sentences: int) -> TokenizedDoc:
    """Trim a document to `sentences` sentences around the first ip hit.

    The window is centered on the sentence holding the earliest ip span in
    `hits` and clamped at the document edges; with no hit the first
    `sentences` sentences are kept. Only the ip side of each hit matters.
    """
    if sentences < 1:
        raise ValueError("sentences must be >= 1")
    if not doc.tokens:
        return doc
    sids = doc.sentence_ids or [0] * len(doc.tokens)
    n_sentences = sids[-1] + 1

    first_ip: Optional[int] = None
    if hits is not None and hits.hits:
        first_ip = min(ip_span[0] for ip_span, _, _ in hits.hits)

    if first_ip is None:
        start = 0
    else:
        center = sids[first_ip]
        start = max(0, center - (sentences - 1) // 2)
    end = start + sentences  # exclusive sentence index
    if end > n_sentences:
        end = n_sentences
        start = max(0, end - sentences)

    keep = [i for i, s in enumerate(sids) if start <= s < end]
    return TokenizedDoc(
        doc.complaint_id,
        [doc.tokens[i] for i in keep],
        [doc.token_spans[i] for i in keep],
        [sids[i] for i in keep],
    )


def _windowed(docs: Sequence[TokenizedDoc], cfg: EmbeddingConfig,
              lex: Optional[Lexicon]) -> Sequence[TokenizedDoc]:
    if cfg.window_mode != "ip_window":
        return docs
    if lex is None:
        raise ValueError("ip_window mode needs a lexicon to locate ip mentions")
    out = []
    for doc in docs:
        occ = find_phrase_occurrences(lex.normalize(doc.tokens), lex.ip_phrases)
        hits = MatchResult(doc.complaint_id,
                           [(occ[0], occ[0], 0)] if occ else [], bool(occ))
        out.append(apply_window(doc, hits, cfg.window_sentences))
    return out


def _embed_hashed(docs: Sequence[TokenizedDoc], cfg: EmbeddingConfig,
                  ) -> list[EmbeddingVector]:
    nmin, nmax = cfg.ngram_range
    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    all_hashes = []
    for i, doc in enumerate(docs):
        h = hash_tokens(doc.tokens, cfg.seed)
        all_hashes.append(h)
        offsets[i + 1] = offsets[i] + len(h)
    hashes = (np.concatenate(all_hashes) if all_hashes
              else np.empty(0, dtype=np.uint64))
    counts = _kernels.hashed_ngram_counts(hashes, offsets, nmin, nmax, cfg.dims)
    out = []
    for i, doc in enumerate(docs):
        v = counts[i]
        if not np.any(v):
            v = _fallback_unit(doc.complaint_id, cfg.dims, cfg.seed)
        out.append(EmbeddingVector(doc.complaint_id, cfg.dims, _normalize(v)))
    return out


def _ngrams(tokens: Sequence[str], nmin: int, nmax: int) -> Iterable[str]:
    for n in range(nmin, nmax + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i:i + n])


def _sign_row(term: str, seed: int, dims: int) -> np.ndarray:
    base = np.uint64(token_hash(term, seed))
    idx = np.arange(dims, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = splitmix64_np(base ^ (idx * np.uint64(SPLITMIX_GAMMA)))
    return np.where(bits & np.uint64(1), 1.0, -1.0) / math.sqrt(dims)


def _embed_tfidf_projection(docs: Sequence[TokenizedDoc], cfg: EmbeddingConfig,
                            ) -> list[EmbeddingVector]:
    nmin, nmax = cfg.ngram_range
    n_docs = len(docs)
    doc_terms = []
    df: dict[str, int] = {}
    for doc in docs:
        counts: dict[str, int] = {}
        for g in _ngrams(doc.tokens, nmin, nmax):
            counts[g] = counts.get(g, 0) + 1
        doc_terms.append(counts)
        for g in counts:
            df[g] = df.get(g, 0) + 1
    if not df:
        raise EmptyVocabulary("no tokens in any document")

    idf = {t: math.log((1 + n_docs) / (1 + d)) + 1.0 for t, d in df.items()}
    postings: dict[str, list[tuple[int, float]]] = {t: [] for t in df}
    for i, counts in enumerate(doc_terms):
        total = sum(counts.values())
        for t, c in counts.items():
            postings[t].append((i, (c / total) * idf[t]))

    out = np.zeros((n_docs, cfg.dims))
    for t in sorted(postings):  # sorted for reproducible float accumulation
        row = _sign_row(t, cfg.seed, cfg.dims)
        for i, w in postings[t]:
            out[i] += w * row

    vectors = []
    for i, doc in enumerate(docs):
        v = out[i]
        if not np.any(v):
            v = _fallback_unit(doc.complaint_id, cfg.dims, cfg.seed)
        vectors.append(EmbeddingVector(doc.complaint_id, cfg.dims, _normalize(v)))
    return vectors


def embed_corpus(docs: Sequence[TokenizedDoc], cfg: EmbeddingConfig,
                 lex: Optional[Lexicon] = None) -> list[EmbeddingVector]:
    """Embed documents under cfg; deterministic given (docs, cfg)."""
    if all(not d.tokens for d in docs):
        raise EmptyVocabulary("every document is empty after preprocessing")
    docs = _windowed(docs, cfg, lex)
    if cfg.provider == "hashed_ngrams":
        return _embed_hashed(docs, cfg)
    if cfg.provider == "tfidf_projection":
        return _embed_tfidf_projection(docs, cfg)
    raise ValueError(f"provider {cfg.provider} cannot embed directly; "
                     "use import_external_vectors")


def write_vectors(path, vectors: Iterable[EmbeddingVector]) -> None:
    """External vector format: one line per record, "id,dims,v1,v2,...";
    floats at round-trip precision."""
    with open(path, "w", encoding="utf-8") as f:
        for v in vectors:
            vals = ",".join(repr(float(x)) for x in v.values)
            f.write(f"{v.complaint_id},{v.dims},{vals}\n")


def import_external_vectors(path, expected_ids: Iterable[str],
                            ) -> list[EmbeddingVector]:
    """Load externally computed vectors, re-normalized to unit length."""
    expected = set(expected_ids)
    seen: dict[str, EmbeddingVector] = {}
    dims_seen: Optional[int] = None
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise ValueError(f"line {line_no}: expected id,dims,values...")
            cid = parts[0]
            try:
                dims = int(parts[1])
                values = np.array([float(x) for x in parts[2:]])
            except ValueError as e:
                raise ValueError(f"line {line_no}: {e}") from None
            if len(values) != dims:
                raise DimensionMismatch(
                    f"line {line_no}: declared dims {dims}, got {len(values)} values")
            if dims_seen is None:
                dims_seen = dims
            elif dims != dims_seen:
                raise DimensionMismatch(
                    f"line {line_no}: dims {dims} != prior dims {dims_seen}")
            if cid in seen:
                raise DuplicateId(f"duplicate vector for id {cid}")
            if cid not in expected:
                continue  # extra rows are ignored
            seen[cid] = EmbeddingVector(cid, dims, _normalize(values))
    missing = expected - set(seen)
    if missing:
        raise MissingId("missing vector(s) for id(s): "
                        + ", ".join(sorted(missing)[:5]))
    return [seen[cid] for cid in sorted(seen)]
