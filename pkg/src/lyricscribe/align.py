"""Transfer segment timestamps onto post-processed lyric lines.

The ensemble step rewrites lyrics without timing. Each final line is matched
back to a raw recognizer segment by normalized Levenshtein distance, keeping
both sequences in temporal order, and inherits that segment's start and end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .asr import TranscriptSegment
from .textnorm import NormalizationRules, normalize_text

DEFAULT_ALIGN_THRESHOLD = 0.2
DEFAULT_MAX_CHAR_RATE = 37.5


@dataclass(frozen=True)
class AlignedLine:
    text: str
    start_s: float
    end_s: float
    source_segment_index: int
    distance: float

    def __post_init__(self):
        if not 0 <= self.start_s < self.end_s:
            raise ValueError(f"bad line span [{self.start_s}, {self.end_s}]")
        if not 0.0 <= self.distance <= 1.0:
            raise ValueError(f"distance {self.distance} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"start_s": self.start_s, "end_s": self.end_s, "text": self.text}


def levenshtein(a: str, b: str) -> int:
    """Unit-cost character edit distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_distance(a: str, b: str) -> float:
    """Levenshtein distance divided by the longer length, in [0, 1].

    Operates on the strings as given; callers normalize first. Two empty
    strings are at distance 0.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


def _pair_distance(a: str, b: str, threshold: float) -> float | None:
    """Distance if it can be within *threshold*, else None (cheap length bound first)."""
    if not a or not b:
        return None
    longest = max(len(a), len(b))
    if abs(len(a) - len(b)) / longest > threshold:
        return None
    d = levenshtein(a, b) / longest
    return d if d <= threshold else None


def align_lines(
    raw_segments: Sequence[TranscriptSegment],
    final_lines: Sequence[str],
    threshold: float = DEFAULT_ALIGN_THRESHOLD,
    rules: NormalizationRules | None = None,
) -> tuple[list[AlignedLine], list[str]]:
    """Monotonic line-to-segment matching.

    Only pairs whose normalized distance (on normalized text) is within
    *threshold* may be matched. Among order-preserving matchings the one with
    the most matched lines wins, ties broken by the smallest total distance.
    Unmatched segments cost nothing; unmatched lines are returned as dropped.

    Returns ``(aligned, dropped)``.
    """
    rules = rules or NormalizationRules()
    lines = list(final_lines)
    if not raw_segments:
        return [], lines
    n, m = len(lines), len(raw_segments)
    norm_lines = [normalize_text(t, rules) for t in lines]
    norm_segs = [normalize_text(s.text, rules) for s in raw_segments]
    dist = [[_pair_distance(norm_lines[i], norm_segs[j], threshold) for j in range(m)] for i in range(n)]

    # best[i][j]: (-matches, total distance) over lines[:i] and segments[:j]
    best = [[(0, 0.0)] * (m + 1) for _ in range(n + 1)]
    move = [[""] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        for j in range(m + 1):
            if i == 0 and j == 0:
                continue
            options = []
            if i > 0 and j > 0 and dist[i - 1][j - 1] is not None:
                neg, total = best[i - 1][j - 1]
                options.append(((neg - 1, total + dist[i - 1][j - 1]), "match"))
            if i > 0:
                options.append((best[i - 1][j], "skip_line"))
            if j > 0:
                options.append((best[i][j - 1], "skip_segment"))
            # min() keeps the first of equal options: match, then skip_line
            best[i][j], move[i][j] = min(options, key=lambda o: o[0])

    aligned: list[AlignedLine] = []
    dropped: list[str] = []
    i, j = n, m
    while i > 0 or j > 0:
        step = move[i][j]
        if step == "match":
            seg = raw_segments[j - 1]
            aligned.append(AlignedLine(lines[i - 1], seg.start_s, seg.end_s, j - 1, dist[i - 1][j - 1]))
            i, j = i - 1, j - 1
        elif step == "skip_line":
            dropped.append(lines[i - 1])
            i -= 1
        else:
            j -= 1
    aligned.reverse()
    dropped.reverse()
    return aligned, dropped


def total_distance(aligned: Sequence[AlignedLine]) -> float:
    """Sum of matched distances, accumulated in line order."""
    total = 0.0
    for line in aligned:
        total += line.distance
    return total


def char_rate(line: AlignedLine, rules: NormalizationRules | None = None) -> float:
    """Characters per second; with *rules*, counts the normalized text (spaces included)."""
    duration = line.end_s - line.start_s
    if duration <= 0:
        raise ValueError("line duration must be positive")
    text = normalize_text(line.text, rules) if rules is not None else line.text
    return len(text) / duration


def char_rate_ok(
    line: AlignedLine,
    max_rate: float = DEFAULT_MAX_CHAR_RATE,
    rules: NormalizationRules | None = None,
) -> bool:
    """False when the line is sung implausibly fast (rate strictly above *max_rate*)."""
    return char_rate(line, rules) <= max_rate
