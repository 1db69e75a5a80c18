"""CFPB complaint CSV ingestion: parsing, cleaning, tokenization, stats.

The input is the public consumer-complaint export: UTF-8 CSV, RFC-4180
quoting, 18 named columns. Cleaning drops narrative-less rows, removes
same-day duplicate narratives (keeping the lexicographically smallest
complaint id), and flags near-identical resubmissions sent to different
companies without dropping them.
"""

from __future__ import annotations

import csv
import logging
import math
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field, asdict
from datetime import date, datetime
from importlib import resources
from typing import Callable, Iterable, Iterator, Optional

from .errors import EmptyNarrative, MalformedRow, MissingRequiredColumn

logger = logging.getLogger(__name__)

# Column names exactly as the public export's header row spells them.
CFPB_FIELDS = (
    "Date received",
    "Product",
    "Sub-product",
    "Issue",
    "Sub-issue",
    "Consumer complaint narrative",
    "Company public response",
    "Company",
    "State",
    "ZIP code",
    "Tags",
    "Consumer consent provided?",
    "Submitted via",
    "Date sent to company",
    "Company response to consumer",
    "Timely response?",
    "Customer disputed?",
    "Complaint ID",
)

# Live CFPB exports spell one header differently; accepted as an alias.
HEADER_ALIASES = {"Consumer disputed?": "Customer disputed?"}

REQUIRED_FIELDS = ("Date received", "Complaint ID")


@dataclass
class Complaint:
    """One CFPB record. Optional text fields hold None when absent."""

    complaint_id: str
    date_received: date
    product: Optional[str] = None
    sub_product: Optional[str] = None
    issue: Optional[str] = None
    sub_issue: Optional[str] = None
    narrative: Optional[str] = None
    company_public_response: Optional[str] = None
    company: str = ""
    state: str = ""
    zip: str = ""
    tags: Optional[str] = None
    consent_provided: str = ""
    submitted_via: str = ""
    date_sent: Optional[date] = None
    company_response: str = ""
    timely: str = ""
    disputed: Optional[str] = None

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["date_received"] = self.date_received.isoformat()
        rec["date_sent"] = self.date_sent.isoformat() if self.date_sent else None
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Complaint":
        rec = dict(rec)
        rec["date_received"] = date.fromisoformat(rec["date_received"])
        if rec.get("date_sent"):
            rec["date_sent"] = date.fromisoformat(rec["date_sent"])
        else:
            rec["date_sent"] = None
        return cls(**rec)


@dataclass
class TokenizedDoc:
    """Lowercased tokens plus character spans back into the narrative.

    sentence_ids assigns each token the 0-based index of the sentence it
    belongs to (terminal-punctuation heuristic, computed from the gaps
    between tokens so dots inside money tokens do not split sentences).
    """

    complaint_id: str
    tokens: list[str]
    token_spans: list[tuple[int, int]]
    sentence_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        assert len(self.tokens) == len(self.token_spans)


@dataclass
class CleaningReport:
    input_count: int
    excluded_missing_narrative: int
    excluded_duplicates: int
    flagged_resubmissions: int
    retained_count: int
    length_mean: float
    length_sd: float
    resubmission_ids: list[str] = field(default_factory=list)

    @classmethod
    def balanced(cls, input_count: int, excluded_missing_narrative: int,
                 excluded_duplicates: int, flagged_resubmissions: int = 0,
                 length_mean: float = 0.0, length_sd: float = 0.0,
                 resubmission_ids: Optional[list[str]] = None) -> "CleaningReport":
        """Build a report with retained_count derived from the balance rule."""
        retained = input_count - excluded_missing_narrative - excluded_duplicates
        if retained < 0:
            raise ValueError("exclusions exceed input count")
        if flagged_resubmissions > retained:
            raise ValueError("more resubmission flags than retained complaints")
        return cls(input_count, excluded_missing_narrative, excluded_duplicates,
                   flagged_resubmissions, retained, length_mean, length_sd,
                   resubmission_ids or [])

    def to_json_dict(self) -> dict:
        return asdict(self)


def _parse_date(raw: str) -> date:
    raw = raw.strip()
    for fmt in ("%m/%d/%Y", "%Y-%m-%d", "%m/%d/%y"):
        try:
            return datetime.strptime(raw, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date: {raw!r}")


def parse_csv(path, schema_mode: str = "lenient",
              on_row_error: Optional[Callable[[int, str], None]] = None,
              ) -> Iterator[Complaint]:
    """Stream Complaints from a CFPB-schema CSV.

    strict: the header must contain exactly the 18 known columns
    (order-insensitive) and any malformed row aborts. lenient: unknown
    columns are ignored, missing optional columns become empty, and
    malformed rows are reported (on_row_error or a log warning) and
    skipped.
    """
    if schema_mode not in ("strict", "lenient"):
        raise ValueError(f"unknown schema_mode: {schema_mode}")

    def report(line_no: int, reason: str):
        if schema_mode == "strict":
            raise MalformedRow(line_no, reason)
        if on_row_error is not None:
            on_row_error(line_no, reason)
        else:
            logger.warning("skipping line %d: %s", line_no, reason)

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingRequiredColumn("file has no header row") from None
        header = [HEADER_ALIASES.get(h.strip(), h.strip()) for h in header]
        known = set(CFPB_FIELDS)
        if schema_mode == "strict":
            missing = known - set(header)
            if missing:
                raise MissingRequiredColumn(
                    "header missing column(s): " + ", ".join(sorted(missing)))
            extra = set(header) - known
            if extra:
                raise MissingRequiredColumn(
                    "unexpected column(s) in strict mode: " + ", ".join(sorted(extra)))
        else:
            missing_req = set(REQUIRED_FIELDS) - set(header)
            if missing_req:
                raise MissingRequiredColumn(
                    "header missing column(s): " + ", ".join(sorted(missing_req)))
        col = {name: header.index(name) for name in known if name in header}

        def get(row, name):
            i = col.get(name)
            if i is None or i >= len(row):
                return ""
            return row[i].strip()

        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                report(line_no, f"expected {len(header)} columns, got {len(row)}")
                continue
            cid = get(row, "Complaint ID")
            if not cid:
                report(line_no, "empty Complaint ID")
                continue
            try:
                received = _parse_date(get(row, "Date received"))
                sent_raw = get(row, "Date sent to company")
                sent = _parse_date(sent_raw) if sent_raw else None
            except ValueError as e:
                report(line_no, str(e))
                continue
            yield Complaint(
                complaint_id=cid,
                date_received=received,
                product=get(row, "Product") or None,
                sub_product=get(row, "Sub-product") or None,
                issue=get(row, "Issue") or None,
                sub_issue=get(row, "Sub-issue") or None,
                narrative=get(row, "Consumer complaint narrative") or None,
                company_public_response=get(row, "Company public response") or None,
                company=get(row, "Company"),
                state=get(row, "State"),
                zip=get(row, "ZIP code"),
                tags=get(row, "Tags") or None,
                consent_provided=get(row, "Consumer consent provided?"),
                submitted_via=get(row, "Submitted via"),
                date_sent=sent,
                company_response=get(row, "Company response to consumer"),
                timely=get(row, "Timely response?"),
                disputed=get(row, "Customer disputed?") or None,
            )


# --- tokenization -----------------------------------------------------------

# Money redactions like {$6000.00} stay whole; $-amounts keep their sign
# and internal separators; everything else is runs of letters/digits.
# Punctuation acts purely as a token boundary (hyphens split words).
_TOKEN_RE = re.compile(
    r"\{\$[^{}]*\}"
    r"|\$\d+(?:[.,]\d+)*"
    r"|[^\W_]+",
    re.UNICODE,
)

_SENTENCE_TERMINATORS = frozenset(".!?")


def _load_stopwords() -> frozenset[str]:
    text = resources.files("rarefind.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


STOPWORDS = _load_stopwords()


def _has_letter_or_digit(tok: str) -> bool:
    return any(ch.isalnum() for ch in tok)


def _has_letter(tok: str) -> bool:
    return any(unicodedata.category(ch).startswith("L") for ch in tok)


def tokenize(narrative: str, preset: str = "raw", complaint_id: str = "") -> TokenizedDoc:
    """Tokenize one narrative under a preset.

    raw: lowercase; whitespace and punctuation are boundaries; redaction
    markers ("xxxx", "{$...}") and $-amounts survive as single tokens.
    light: raw minus tokens containing no letter and no digit.
    aggressive: light minus number-only tokens and the shipped stopword
    list (named-entity removal is deliberately not attempted).
    """
    if preset not in ("raw", "light", "aggressive"):
        raise ValueError(f"unknown preset: {preset}")
    if narrative is None or not narrative.strip():
        raise EmptyNarrative("narrative is empty")

    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    sentence_ids: list[int] = []
    sentence = 0
    prev_end = 0
    for m in _TOKEN_RE.finditer(narrative):
        tok = m.group().lower()
        gap = narrative[prev_end:m.start()]
        if tokens and any(ch in _SENTENCE_TERMINATORS for ch in gap):
            sentence += 1
        if preset in ("light", "aggressive") and not _has_letter_or_digit(tok):
            prev_end = m.end()
            continue
        if preset == "aggressive":
            if not _has_letter(tok) or tok in STOPWORDS:
                prev_end = m.end()
                continue
        tokens.append(tok)
        spans.append((m.start(), m.end()))
        sentence_ids.append(sentence)
        prev_end = m.end()
    return TokenizedDoc(complaint_id, tokens, spans, sentence_ids)


# --- cleaning ----------------------------------------------------------------

def _token_multiset(narrative: str) -> Counter:
    return Counter(m.group().lower() for m in _TOKEN_RE.finditer(narrative))


def multiset_jaccard(a: Counter, b: Counter) -> float:
    """Token-multiset Jaccard: sum of min counts over sum of max counts."""
    if not a and not b:
        return 1.0
    inter = sum((a & b).values())
    union = sum((a | b).values())
    return inter / union if union else 0.0


def _find_resubmissions(complaints: list[Complaint],
                        threshold: float) -> set[str]:
    """Ids of complaints whose narrative matches another complaint sent to a
    different company at >= threshold multiset Jaccard.

    Exact duplicates are caught by hash grouping; near duplicates only need
    pairwise checks within a token-count window (J >= t forces the count
    ratio >= t), which keeps the scan far from quadratic on real corpora.
    """
    flagged: set[str] = set()

    by_text: dict[str, list[Complaint]] = defaultdict(list)
    for c in complaints:
        by_text[c.narrative].append(c)
    for group in by_text.values():
        companies = {c.company for c in group}
        if len(group) > 1 and len(companies) > 1:
            flagged.update(c.complaint_id for c in group)

    sets = [(c, _token_multiset(c.narrative)) for c in complaints]
    sets.sort(key=lambda pair: sum(pair[1].values()))
    counts = [sum(ms.values()) for _, ms in sets]
    for i, (ci, mi) in enumerate(sets):
        for j in range(i + 1, len(sets)):
            cj, mj = sets[j]
            if counts[i] < threshold * counts[j]:
                break  # sorted by size: every later doc is even larger
            if ci.company == cj.company:
                continue
            if ci.narrative == cj.narrative:
                continue  # already handled by hash grouping
            if multiset_jaccard(mi, mj) >= threshold:
                flagged.add(ci.complaint_id)
                flagged.add(cj.complaint_id)
    return flagged


def clean(corpus: Iterable[Complaint], resubmission_threshold: float = 0.98,
          ) -> tuple[list[Complaint], CleaningReport]:
    """Apply the cleaning rules and report balanced counts.

    Drops narrative-less complaints; among the rest drops all but the
    smallest-id member of any group sharing an identical narrative and
    date_received (the public CSV carries no time of day, so identical
    text on the same day is the duplicate proxy); flags same-text
    different-company resubmissions without dropping them. Output is
    sorted by complaint_id so results are independent of row order.
    """
    if not 0.0 < resubmission_threshold <= 1.0:
        raise ValueError("resubmission_threshold must be in (0, 1]")
    corpus = list(corpus)
    input_count = len(corpus)

    with_narrative = [c for c in corpus
                      if c.narrative is not None and c.narrative.strip()]
    excluded_missing = input_count - len(with_narrative)

    groups: dict[tuple[str, date], Complaint] = {}
    for c in with_narrative:
        key = (c.narrative, c.date_received)
        kept = groups.get(key)
        if kept is None or c.complaint_id < kept.complaint_id:
            groups[key] = c
    retained = sorted(groups.values(), key=lambda c: c.complaint_id)
    excluded_duplicates = len(with_narrative) - len(retained)

    flagged = _find_resubmissions(retained, resubmission_threshold)

    lengths = [sum(1 for _ in _TOKEN_RE.finditer(c.narrative)) for c in retained]
    if lengths:
        mean = sum(lengths) / len(lengths)
        sd = math.sqrt(sum((x - mean) ** 2 for x in lengths) / len(lengths))
    else:
        mean = sd = 0.0

    report = CleaningReport.balanced(
        input_count=input_count,
        excluded_missing_narrative=excluded_missing,
        excluded_duplicates=excluded_duplicates,
        flagged_resubmissions=len(flagged),
        length_mean=mean,
        length_sd=sd,
        resubmission_ids=sorted(flagged),
    )
    return retained, report


# --- corpus statistics --------------------------------------------------------

@dataclass
class CorpusStats:
    mean: float
    sd: float
    per_year: dict[int, int]


def corpus_stats(docs: list[TokenizedDoc],
                 dates: Optional[dict[str, date]] = None) -> CorpusStats:
    """Population mean/sd of token counts; optional per-year histogram.

    TokenizedDoc carries no date, so the year histogram needs the
    complaint_id -> date_received mapping supplied alongside.
    """
    if not docs:
        return CorpusStats(0.0, 0.0, {})
    lengths = [len(d.tokens) for d in docs]
    mean = sum(lengths) / len(lengths)
    sd = math.sqrt(sum((x - mean) ** 2 for x in lengths) / len(lengths))
    per_year: dict[int, int] = {}
    if dates:
        for d in docs:
            when = dates.get(d.complaint_id)
            if when is not None:
                per_year[when.year] = per_year.get(when.year, 0) + 1
    return CorpusStats(mean, sd, dict(sorted(per_year.items())))
