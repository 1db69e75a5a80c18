"""Keyword lexicons and proximity matching.

Two phrase sets drive candidate discovery: intimate-partner phrases and
financial-abuse phrases. A document "matches with proximity" when some
occurrence of each kind sits within a bounded token gap. Phrases and
document tokens are normalized by the same rewrite rules before matching
("x gf", "x girlfriend" and "x-girlfriend" all unify with "ex girlfriend"
once hyphen splitting and the x->ex rewrite apply).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional, Sequence, Union

from .errors import EmptySample
from .ingest import TokenizedDoc

Span = tuple[int, int]  # token index range, half-open like a slice
Phrase = tuple[str, ...]

WindowT = Union[int, float]  # float only for math.inf


def _split_phrase(text: str) -> tuple[str, ...]:
    # Hyphens split exactly as the tokenizer splits them.
    return tuple(text.lower().replace("-", " ").split())


def normalize_tokens(tokens: Sequence[str], rewrites: dict[str, str]) -> list[str]:
    return [rewrites.get(t, t) for t in tokens]


@dataclass(frozen=True)
class Lexicon:
    ip_phrases: frozenset[Phrase]
    abuse_phrases: frozenset[Phrase]
    rewrites: dict[str, str]

    @classmethod
    def from_dict(cls, doc: dict) -> "Lexicon":
        rewrites = dict(doc.get("rewrites", {}))
        def norm(items: Iterable[str]) -> frozenset[Phrase]:
            phrases = set()
            for item in items:
                phrase = tuple(normalize_tokens(_split_phrase(item), rewrites))
                if not phrase:
                    raise ValueError(f"empty phrase: {item!r}")
                phrases.add(phrase)
            return frozenset(phrases)
        return cls(norm(doc["ip_phrases"]), norm(doc["abuse_phrases"]), rewrites)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "ip_phrases": sorted(" ".join(p) for p in self.ip_phrases),
            "abuse_phrases": sorted(" ".join(p) for p in self.abuse_phrases),
            "rewrites": dict(sorted(self.rewrites.items())),
        }

    def normalize(self, tokens: Sequence[str]) -> list[str]:
        return normalize_tokens(tokens, self.rewrites)


def default_lexicon() -> Lexicon:
    """The shipped intimate-partner / financial-abuse keyword lists."""
    text = resources.files("rarefind.data").joinpath("default_lexicon.json").read_text("utf-8")
    return Lexicon.from_dict(json.loads(text))


def load_lexicon(path) -> Lexicon:
    with open(path, encoding="utf-8") as f:
        return Lexicon.from_dict(json.load(f))


@dataclass
class MatchResult:
    complaint_id: str
    hits: list[tuple[Span, Span, int]]  # (ip_span, abuse_span, gap)
    matched: bool


def find_phrase_occurrences(tokens: Sequence[str],
                            phrases: Iterable[Phrase]) -> list[Span]:
    """All occurrences of all phrases, leftmost-first; overlaps included."""
    by_first: dict[str, list[Phrase]] = {}
    for p in phrases:
        by_first.setdefault(p[0], []).append(p)
    spans: list[Span] = []
    n = len(tokens)
    for i, tok in enumerate(tokens):
        for p in by_first.get(tok, ()):
            m = len(p)
            if i + m <= n and tuple(tokens[i:i + m]) == p:
                spans.append((i, i + m))
    spans.sort()
    return spans


def span_gap(a: Span, b: Span) -> int:
    """Tokens strictly between two spans; 0 when adjacent or overlapping."""
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def match_with_proximity(doc: TokenizedDoc, lex: Lexicon,
                         window: WindowT = 10) -> MatchResult:
    """Pair every ip occurrence with every abuse occurrence at gap <= window.

    window = math.inf degenerates to the no-proximity baseline: matched
    iff the document contains any ip phrase and any abuse phrase.
    """
    if window < 0:
        raise ValueError("window must be >= 0")
    tokens = lex.normalize(doc.tokens)
    ip_spans = find_phrase_occurrences(tokens, lex.ip_phrases)
    hits: list[tuple[Span, Span, int]] = []
    if ip_spans:
        abuse_spans = find_phrase_occurrences(tokens, lex.abuse_phrases)
        for a in ip_spans:
            for b in abuse_spans:
                gap = span_gap(a, b)
                if gap <= window:
                    hits.append((a, b, gap))
    return MatchResult(doc.complaint_id, hits, bool(hits))


@dataclass
class PrecisionRecall:
    precision: Optional[float]  # None when no matched rows exist
    recall: Optional[float]     # None when no truly-positive rows exist


def estimate_precision_recall(
        sample_labels: Sequence[tuple[bool, bool]]) -> PrecisionRecall:
    """Precision/recall arithmetic over (matched, truly_positive) rows.

    Undefined denominators come back as None rather than 0 so callers can
    tell "no evidence" apart from "measured zero".
    """
    if not sample_labels:
        raise EmptySample("no labeled rows")
    tp = sum(1 for m, t in sample_labels if m and t)
    fp = sum(1 for m, t in sample_labels if m and not t)
    fn = sum(1 for m, t in sample_labels if not m and t)
    precision = tp / (tp + fp) if (tp + fp) else None
    recall = tp / (tp + fn) if (tp + fn) else None
    return PrecisionRecall(precision, recall)


NO_PROXIMITY: float = math.inf
