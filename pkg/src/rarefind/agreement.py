"""Inter-rater reliability for review rounds.

Cohen's kappa covers fixed two-rater designs; Fleiss's kappa covers the
rotating-pair design the sampling scheme produces (each item gets two of
several reviewers). "unsure" stays a first-class category in both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import Degenerate, EmptySample, IncompleteRound

VERDICTS = ("relevant", "not_relevant", "unsure")


@dataclass
class LabelMatrix:
    """Item x category rater-count matrix with a fixed rater count per item."""

    items: list[str]
    categories: list[str]
    counts: np.ndarray
    raters_per_item: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (len(self.items), len(self.categories)):
            raise ValueError("counts shape does not match items x categories")
        sums = self.counts.sum(axis=1)
        if not np.all(sums == self.raters_per_item):
            raise ValueError("every row must sum to raters_per_item")

    @classmethod
    def from_verdicts(cls, verdicts: Mapping[str, Sequence[str]],
                      categories: Sequence[str] | None = None) -> "LabelMatrix":
        """Build from item -> list-of-verdicts (equal length per item)."""
        items = sorted(verdicts)
        if not items:
            raise EmptySample("no items")
        raters = len(verdicts[items[0]])
        if categories is None:
            seen = sorted({v for vs in verdicts.values() for v in vs})
            categories = seen
        cat_index = {c: i for i, c in enumerate(categories)}
        counts = np.zeros((len(items), len(categories)))
        for r, item in enumerate(items):
            vs = verdicts[item]
            if len(vs) != raters:
                raise ValueError("unequal rater counts across items")
            for v in vs:
                counts[r, cat_index[v]] += 1
        return cls(items, list(categories), counts, raters)


def cohen_kappa(pairs: Sequence[tuple[str, str]]) -> float:
    """kappa = (p_o - p_e) / (1 - p_e), marginal-product chance agreement.

    Perfect observed agreement returns 1.0 even when only one category is
    on the table; a degenerate chance term with imperfect agreement raises.
    """
    if not pairs:
        raise EmptySample("no rating pairs")
    n = len(pairs)
    p_o = sum(1 for a, b in pairs if a == b) / n
    cats = sorted({a for a, _ in pairs} | {b for _, b in pairs})
    m1 = {c: sum(1 for a, _ in pairs if a == c) / n for c in cats}
    m2 = {c: sum(1 for _, b in pairs if b == c) / n for c in cats}
    p_e = sum(m1[c] * m2[c] for c in cats)
    if p_o == 1.0:
        return 1.0
    if 1.0 - p_e == 0.0:
        raise Degenerate("chance agreement is 1 with imperfect agreement")
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(m: LabelMatrix) -> float:
    """Standard Fleiss computation over an item x category count matrix."""
    if m.raters_per_item < 2:
        raise ValueError("fleiss_kappa needs at least 2 raters per item")
    counts = m.counts
    n = m.raters_per_item
    # per-item agreement: fraction of agreeing rater pairs
    p_i = (np.sum(counts * counts, axis=1) - n) / (n * (n - 1))
    p_bar = float(p_i.mean())
    proportions = counts.sum(axis=0) / counts.sum()
    p_e = float(np.dot(proportions, proportions))
    if p_bar == 1.0:
        return 1.0
    if 1.0 - p_e == 0.0:
        raise Degenerate("chance agreement is 1 with imperfect agreement")
    return (p_bar - p_e) / (1.0 - p_e)


def disagreements(round_labels: Mapping[str, Sequence[str]]) -> list[str]:
    """Items whose two verdicts differ; unsure differs from every definite
    verdict. Items without both verdicts abort with the unlabeled list."""
    incomplete = sorted(item for item, vs in round_labels.items()
                        if len(vs) < 2)
    if incomplete:
        raise IncompleteRound(incomplete)
    return sorted(item for item, vs in round_labels.items()
                  if vs[0] != vs[1])


@dataclass
class AgreementReport:
    category: str
    kappa: float | None  # None when degenerate/undefined
    n_items: int

    def to_json_dict(self) -> dict:
        return {"category": self.category, "kappa": self.kappa,
                "n_items": self.n_items}
