import random
import string

import pytest
from hypothesis import given, strategies as st

from lyricscribe.align import (
    AlignedLine,
    align_lines,
    char_rate,
    char_rate_ok,
    levenshtein,
    normalized_distance,
    total_distance,
)
from lyricscribe.asr import TranscriptSegment
from lyricscribe.textnorm import normalize_text
from oracles import best_matching, edit_cost_oracle


def segs(*texts, step=2.0):
    return [TranscriptSegment(k * step, k * step + step - 0.5, t) for k, t in enumerate(texts)]


def test_levenshtein_matches_oracle():
    rng = random.Random(3)
    for _ in range(1000):
        a = "".join(rng.choices("abcd", k=rng.randint(0, 8)))
        b = "".join(rng.choices("abcd", k=rng.randint(0, 8)))
        assert levenshtein(a, b) == edit_cost_oracle(a, b)


@given(st.text(max_size=20), st.text(max_size=20))
def test_normalized_distance_range_and_symmetry(a, b):
    d = normalized_distance(a, b)
    assert 0.0 <= d <= 1.0
    assert d == normalized_distance(b, a)
    assert (d == 0.0) == (a == b)


def test_normalized_distance_examples():
    assert normalized_distance("", "") == 0.0
    assert normalized_distance("abcde", "abcdx") == pytest.approx(0.2)
    assert normalized_distance("kitten", "sitting") == pytest.approx(3 / 7)


def _random_instance(rng):
    base = ["love me", "love you", "hold on", "night sky", "dance now", "fire rain"]
    lines = [rng.choice(base) for _ in range(rng.randint(0, 6))]
    texts = []
    for _ in range(rng.randint(0, 6)):
        t = list(rng.choice(base))
        for _ in range(rng.randint(0, 2)):
            t[rng.randrange(len(t))] = rng.choice(string.ascii_lowercase)
        texts.append("".join(t))
    return lines, segs(*texts)


def test_matches_brute_force_enumeration():
    rng = random.Random(11)
    for _ in range(100):
        lines, raw = _random_instance(rng)
        aligned, dropped = align_lines(raw, lines, 0.2)
        dist = [
            [normalized_distance(normalize_text(l), normalize_text(s.text)) for s in raw] for l in lines
        ]
        count, total = best_matching(dist, len(lines), len(raw), 0.2)
        assert len(aligned) == count
        assert total_distance(aligned) == total
        assert len(aligned) + len(dropped) == len(lines)


@given(st.randoms(use_true_random=False))
def test_output_is_monotonic_and_within_threshold(rng):
    lines, raw = _random_instance(rng)
    aligned, _ = align_lines(raw, lines, 0.2)
    for a, b in zip(aligned, aligned[1:]):
        assert a.start_s <= b.start_s
        assert a.source_segment_index < b.source_segment_index
    assert all(line.distance <= 0.2 for line in aligned)


def test_keeps_final_text_and_takes_segment_times():
    raw = segs("Subtitles by someone", "hello darknes my old friend", "Thank you.", "I've come to talk")
    aligned, dropped = align_lines(raw, ["Hello darkness, my old friend", "I've come to talk", "invented"], 0.2)
    assert [(a.text, a.source_segment_index) for a in aligned] == [
        ("Hello darkness, my old friend", 1),
        ("I've come to talk", 3),
    ]
    assert aligned[0].to_dict() == {"start_s": 2.0, "end_s": 3.5, "text": "Hello darkness, my old friend"}
    assert dropped == ["invented"]


def test_threshold_is_inclusive():
    aligned, _ = align_lines(segs("abcdx"), ["abcde"], 0.2)
    assert len(aligned) == 1 and aligned[0].distance == pytest.approx(0.2)
    aligned, _ = align_lines(segs("abcdx"), ["abcde"], 0.19)
    assert aligned == []


def test_no_segments_drops_everything():
    assert align_lines([], ["a", "b"]) == ([], ["a", "b"])


def test_char_rate_boundary():
    # 15 characters over 0.4 s is exactly 37.5 per second
    line = AlignedLine("abcdefghijklmno", 1.0, 1.4, 0, 0.0)
    assert char_rate(line) == pytest.approx(37.5)
    assert char_rate_ok(AlignedLine("a" * 75, 0.0, 2.0, 0, 0.0))
    assert not char_rate_ok(AlignedLine("a" * 76, 0.0, 2.0, 0, 0.0))


def test_aligned_line_validation():
    with pytest.raises(ValueError):
        AlignedLine("x", 2.0, 1.0, 0, 0.0)
