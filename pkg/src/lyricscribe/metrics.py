"""Word error rate and corpus aggregation."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Mapping, Sequence

from .textnorm import NormalizationRules, normalize_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WerBreakdown:
    insertions: int
    substitutions: int
    deletions: int
    reference_words: int

    def __post_init__(self):
        if self.reference_words <= 0:
            raise ValueError("reference_words must be positive")

    @property
    def errors(self) -> int:
        return self.insertions + self.substitutions + self.deletions

    @property
    def wer(self) -> float:
        return self.errors / self.reference_words

    def to_dict(self) -> dict:
        return {
            "insertions": self.insertions,
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "reference_words": self.reference_words,
            "wer": self.wer,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "WerBreakdown":
        return cls(d["insertions"], d["substitutions"], d["deletions"], d["reference_words"])


@dataclass
class ItemScore:
    item_id: str
    language: str
    breakdown: WerBreakdown
    flagged: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        d = {"item_id": self.item_id, "language": self.language, **self.breakdown.to_dict()}
        if self.flagged:
            d["flagged"] = True
            d["note"] = self.note
        return d


@dataclass
class CorpusWerReport:
    per_item: list[ItemScore]
    excluded: list[tuple[str, str]] = field(default_factory=list)

    @property
    def mean_wer(self) -> float | None:
        if not self.per_item:
            return None
        return fmean(s.breakdown.wer for s in self.per_item)

    @property
    def pooled_wer(self) -> float | None:
        if not self.per_item:
            return None
        errors = sum(s.breakdown.errors for s in self.per_item)
        words = sum(s.breakdown.reference_words for s in self.per_item)
        return errors / words

    @property
    def per_language(self) -> dict[str, float]:
        groups: dict[str, list[float]] = defaultdict(list)
        for s in self.per_item:
            groups[s.language].append(s.breakdown.wer)
        return {lang: fmean(v) for lang, v in sorted(groups.items())}

    def language_counts(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for s in self.per_item:
            counts[s.language] += 1
        return dict(sorted(counts.items()))

    def to_dict(self) -> dict:
        return {
            "mean_wer": self.mean_wer,
            "pooled_wer": self.pooled_wer,
            "per_language": self.per_language,
            "per_item": [s.to_dict() for s in self.per_item],
            "excluded": [{"item_id": i, "reason": r} for i, r in self.excluded],
        }


def tokenize(text: str) -> list[str]:
    return text.split()


def word_error_rate(reference: list[str], hypothesis: list[str]) -> WerBreakdown:
    """Align two token lists with unit edit costs and count the edits.

    Among alignments of minimal cost the one with the fewest substitutions,
    then the fewest insertions, is reported. The choice only moves counts
    between categories; the rate itself is unaffected.
    """
    if not reference:
        raise ValueError("reference must contain at least one word")
    n, m = len(reference), len(hypothesis)
    # each cell holds (cost, substitutions, insertions); tuple order is the tie-break
    prev = [(j, 0, j) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0, 0)]
        r = reference[i - 1]
        for j in range(1, m + 1):
            c, s, ins = prev[j - 1]
            if r == hypothesis[j - 1]:
                diag = (c, s, ins)
            else:
                diag = (c + 1, s + 1, ins)
            c, s, ins = prev[j]
            delete = (c + 1, s, ins)
            c, s, ins = cur[j - 1]
            insert = (c + 1, s, ins + 1)
            cur.append(min(diag, delete, insert))
        prev = cur
    cost, subs, ins = prev[m]
    return WerBreakdown(
        insertions=ins,
        substitutions=subs,
        deletions=cost - subs - ins,
        reference_words=n,
    )


def edit_distance(reference: Sequence[str], hypothesis: Sequence[str]) -> int:
    """Total unit-cost edits only; cheaper than :func:`word_error_rate`."""
    prev = list(range(len(hypothesis) + 1))
    for i, r in enumerate(reference, 1):
        cur = [i]
        for j, h in enumerate(hypothesis, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def corpus_wer(
    items: Iterable[tuple[str, str, str, str]],
    rules: Mapping[str, NormalizationRules] | None = None,
) -> CorpusWerReport:
    """Score ``(item_id, language, reference, hypothesis)`` tuples.

    Both sides are normalized with the rules registered for the item's
    language (default rules for that language otherwise). Items whose
    reference normalizes to nothing are excluded and listed in the report.
    """
    rules = rules or {}
    scored, excluded = [], []
    for item_id, language, reference, hypothesis in items:
        r = rules.get(language) or NormalizationRules.for_language(language)
        ref_tokens = tokenize(normalize_text(reference, r))
        if not ref_tokens:
            logger.warning("item %s: reference is empty after normalization, excluded", item_id)
            excluded.append((item_id, "empty reference"))
            continue
        hyp_tokens = tokenize(normalize_text(hypothesis, r))
        scored.append(ItemScore(item_id, language, word_error_rate(ref_tokens, hyp_tokens)))
    return CorpusWerReport(per_item=scored, excluded=excluded)
