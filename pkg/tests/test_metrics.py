import random

import pytest
from hypothesis import given, strategies as st

from lyricscribe.metrics import (
    CorpusWerReport,
    ItemScore,
    WerBreakdown,
    corpus_wer,
    edit_distance,
    tokenize,
    word_error_rate,
)
from oracles import edit_cost_oracle

tokens = st.lists(st.sampled_from("abcde"), max_size=12)
nonempty = st.lists(st.sampled_from("abcde"), min_size=1, max_size=12)


def test_matches_recursive_oracle_on_random_pairs():
    rng = random.Random(7)
    for _ in range(1000):
        ref = rng.choices("abcde", k=rng.randint(1, 12))
        hyp = rng.choices("abcde", k=rng.randint(0, 12))
        expected = edit_cost_oracle(ref, hyp)
        assert word_error_rate(ref, hyp).errors == expected
        assert edit_distance(ref, hyp) == expected


@given(nonempty, tokens)
def test_edit_count_bounds(ref, hyp):
    b = word_error_rate(ref, hyp)
    assert abs(len(ref) - len(hyp)) <= b.errors <= max(len(ref), len(hyp))
    # the breakdown is a real alignment: counts reconcile with both lengths
    assert len(ref) - b.deletions + b.insertions == len(hyp)
    assert b.substitutions <= min(len(ref), len(hyp))


@given(nonempty)
def test_identity_scores_zero(x):
    assert word_error_rate(x, x).wer == 0


@given(nonempty, nonempty, tokens)
def test_triangle_inequality(a, b, c):
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


def test_breakdown_prefers_fewer_substitutions():
    # "a b" -> "b a" costs 2 either way; two substitutions or delete+insert
    b = word_error_rate(["a", "b"], ["b", "a"])
    assert b.errors == 2
    assert b.substitutions == 0


def test_worked_example():
    b = word_error_rate(tokenize("the cat sat on the mat"), tokenize("the cat sit on mat today"))
    assert (b.substitutions, b.deletions, b.insertions) == (1, 1, 1)
    assert b.wer == pytest.approx(0.5)


def test_empty_reference_rejected():
    with pytest.raises(ValueError):
        word_error_rate([], ["a"])


def test_corpus_wer_excludes_empty_references(caplog):
    report = corpus_wer(
        [
            ("a", "en", "Hello world", "hello world"),
            ("b", "en", "!!! 😀", "anything"),
            ("c", "fr", "un deux trois quatre", "un deux trois"),
        ]
    )
    assert [s.item_id for s in report.per_item] == ["a", "c"]
    assert report.excluded == [("b", "empty reference")]
    assert report.mean_wer == pytest.approx(0.125)
    assert report.pooled_wer == pytest.approx(1 / 6)
    assert report.per_language == {"en": 0.0, "fr": 0.25}
    assert "excluded" in caplog.text


def test_corpus_wer_normalizes_numbers():
    report = corpus_wer([("x", "en", "I got 99 problems", "i got ninety nine problems")])
    assert report.mean_wer == 0.0


def test_empty_report():
    report = CorpusWerReport([])
    assert report.mean_wer is None and report.pooled_wer is None


def test_breakdown_round_trip():
    b = WerBreakdown(1, 2, 3, 10)
    assert WerBreakdown.from_dict(b.to_dict()) == b
    d = ItemScore("i", "en", b, flagged=True, note="boom").to_dict()
    assert d["flagged"] and d["wer"] == pytest.approx(0.6)
    with pytest.raises(ValueError):
        WerBreakdown(0, 0, 0, 0)
