import random

import pytest
from hypothesis import given, strategies as st

from lyricscribe.errors import InputError
from lyricscribe.gate import DEFAULT_VOCAL_TAGS, GateConfig, MockTaggerBackend, TagScores, is_vocal, vocal_score

probs = st.floats(0.0, 1.0)
thresholds = st.floats(0.001, 0.999)
tag_scores = st.dictionaries(st.sampled_from(sorted(DEFAULT_VOCAL_TAGS) + ["Music", "Drum", "Guitar"]), probs)


def test_default_tags_cover_singing_and_speech():
    assert {"Singing", "Speech"} <= DEFAULT_VOCAL_TAGS
    assert "Music" not in DEFAULT_VOCAL_TAGS


@given(tag_scores, thresholds, thresholds)
def test_monotone_in_threshold(scores, t1, t2):
    lo, hi = sorted((t1, t2))
    s = TagScores(scores)
    if is_vocal(s, GateConfig(threshold=hi)):
        assert is_vocal(s, GateConfig(threshold=lo))


@given(tag_scores, st.dictionaries(st.sampled_from(["Music", "Drum", "Guitar", "Bass"]), probs), thresholds)
def test_only_vocal_tags_matter(scores, noise, threshold):
    cfg = GateConfig(threshold=threshold)
    base = {k: v for k, v in scores.items() if k in DEFAULT_VOCAL_TAGS}
    assert is_vocal(TagScores(base), cfg) == is_vocal(TagScores({**base, **noise}), cfg)


def test_threshold_is_inclusive():
    assert is_vocal(TagScores({"Singing": 0.07}))
    assert not is_vocal(TagScores({"Singing": 0.0699}))
    assert not is_vocal(TagScores({"Music": 0.99}))


def test_acceptance_fraction_tracks_threshold():
    rng = random.Random(5)
    scores = [TagScores({"Singing": rng.random()}) for _ in range(20000)]
    for threshold in (0.07, 0.3, 0.5, 0.9):
        cfg = GateConfig(vocal_tags={"Singing"}, threshold=threshold)
        fraction = sum(is_vocal(s, cfg) for s in scores) / len(scores)
        assert fraction == pytest.approx(1 - threshold, abs=0.02)


def test_vocal_score_is_max_over_tags():
    cfg = GateConfig(vocal_tags={"Singing", "Speech"})
    assert vocal_score(TagScores({"Singing": 0.2, "Speech": 0.5, "Music": 0.9}), cfg) == 0.5
    assert vocal_score(TagScores({}), cfg) == 0.0


def test_validation():
    with pytest.raises(ValueError):
        TagScores({"Singing": 1.2})
    with pytest.raises(ValueError):
        GateConfig(vocal_tags=set())
    with pytest.raises(ValueError):
        GateConfig(threshold=0.0)


def test_mock_tagger():
    tagger = MockTaggerBackend({"a": {"scores": {"Singing": 0.5}}})
    assert tagger.tag("a").get("Singing") == 0.5
    with pytest.raises(InputError):
        tagger.tag("b")
    assert tagger.calls == ["a", "b"]
