import pytest
from hypothesis import given, strategies as st

from lyricscribe.asr import (
    AsrRequest,
    MockAsrBackend,
    TranscriptPrediction,
    TranscriptSegment,
    filter_segments,
    localized_prompt,
    prediction_from_body,
)
from lyricscribe.errors import InputError, ProtocolError


@st.composite
def predictions(draw):
    n = draw(st.integers(0, 8))
    probs = draw(st.lists(st.sampled_from([0.0, 0.3, 0.89, 0.9, 0.9000001, 0.95, 1.0]), min_size=n, max_size=n))
    segs = tuple(TranscriptSegment(float(k), k + 0.5, f"line {k}", p) for k, p in enumerate(probs))
    return TranscriptPrediction(segs, "en")


@given(predictions(), st.floats(0, 1))
def test_filter_is_idempotent_and_order_preserving(pred, threshold):
    once = filter_segments(pred, threshold)
    assert filter_segments(once, threshold) == once
    assert all(s.no_speech_prob <= threshold for s in once.segments)
    kept = iter(pred.segments)
    assert all(any(s == t for t in kept) for s in once.segments)


def test_filter_boundary_keeps_exactly_threshold():
    pred = TranscriptPrediction(
        (TranscriptSegment(0, 1, "a", 0.9), TranscriptSegment(1, 2, "b", 0.9000001)), "en"
    )
    assert [s.text for s in filter_segments(pred).segments] == ["a"]


@given(st.one_of(st.none(), st.text(max_size=5)))
def test_localized_prompt_is_total_and_deterministic(lang):
    p = localized_prompt(lang)
    assert p == localized_prompt(lang) and p.endswith(":")


def test_localized_prompts():
    assert localized_prompt("en") == "lyrics:"
    assert localized_prompt("FR") == "paroles:"
    assert localized_prompt("pt") == "lyrics:"
    assert len({localized_prompt(x) for x in ("en", "fr", "es", "it", "ru", "de")}) == 6


def test_segment_validation():
    with pytest.raises(ValueError):
        TranscriptSegment(1.0, 1.0, "x")
    with pytest.raises(ValueError):
        TranscriptSegment(0.0, 1.0, "x", 1.5)
    with pytest.raises(ValueError):
        TranscriptPrediction((TranscriptSegment(2, 3, "b"), TranscriptSegment(0, 1, "a")), "en")


def test_prediction_from_body_skips_bad_segments_and_sorts():
    body = {
        "language": "de",
        "segments": [
            {"start": 3, "end": 4, "text": " zwei "},
            {"start": 5, "end": 5, "text": "zero length"},
            {"start": "x", "end": 2, "text": "junk"},
            {"start": 0, "end": 1, "text": "eins", "no_speech_prob": 0.1},
        ],
    }
    pred = prediction_from_body(body, run_index=2)
    assert pred.lines() == ["eins", "zwei"]
    assert pred.detected_language == "de" and pred.run_index == 2
    with pytest.raises(ProtocolError):
        prediction_from_body({"nope": 1})


SCRIPT = {
    "detect_language": {"a.wav": {"language": "fr", "probability": 0.9}},
    "transcribe": {
        "a.wav": [
            {"language": "fr", "segments": [{"start": 0, "end": 2, "text": "un"}, {"start": 3, "end": 5, "text": "deux"}]},
            {"language": "fr", "segments": [{"start": 0, "end": 2, "text": "une"}]},
        ],
        "b.wav": {
            "runs": [{"segments": [{"start": 0, "end": 1, "text": "prompted"}]}],
            "unprompted_runs": [{"segments": [{"start": 0, "end": 1, "text": "raw"}]}],
        },
    },
    "spans": {"a.wav": {"3.000-5.000": "Thank you."}},
}


def test_mock_replays_runs_and_logs_calls():
    asr = MockAsrBackend(SCRIPT)
    assert asr.detect_language("a.wav") == ("fr", 0.9)
    assert asr.detect_language("b.wav") == ("en", 1.0)
    texts = [asr.transcribe(AsrRequest("a.wav", "paroles:", "fr", k)).lines() for k in range(3)]
    assert texts == [["un", "deux"], ["une"], ["un", "deux"]]
    assert [r.run_index for r in asr.transcribe_calls()] == [0, 1, 2]
    assert asr.calls[0] == ("detect_language", "a.wav")


def test_mock_prompt_sensitivity_and_spans():
    asr = MockAsrBackend(SCRIPT)
    assert asr.transcribe(AsrRequest("b.wav", "lyrics:")).lines() == ["prompted"]
    assert asr.transcribe(AsrRequest("b.wav", "")).lines() == ["raw"]
    assert asr.transcribe(AsrRequest("a.wav", "", span=(3.0, 5.0))).lines() == ["Thank you."]
    assert asr.transcribe(AsrRequest("a.wav", "", span=(0.5, 1.5))).lines() == ["un"]


def test_mock_unknown_audio():
    asr = MockAsrBackend(SCRIPT)
    with pytest.raises(InputError):
        asr.transcribe(AsrRequest("missing.wav", ""))
    with pytest.raises(InputError):
        asr.detect_language("missing.wav")
