import json
import random

import pytest
from hypothesis import given, strategies as st

from lyricscribe.ensemble import (
    EnsembleResponse,
    EnsembleStatus,
    MockChatBackend,
    PredictionSet,
    PromptMode,
    RateLimiter,
    build_instruction_prompt,
    build_messages,
    ensemble,
    extract_json_object,
    gt_selection_experiment,
    parse_response,
    request_digest,
    serialize_predictions,
)
from lyricscribe.errors import ProtocolError, ResponseParseError, ResponseSchemaError, TransportError
from lyricscribe.metrics import tokenize, word_error_rate
from lyricscribe.synthetic import gt_corpus
from lyricscribe.textnorm import normalize_text

KEYS = [f"prediction_{i}" for i in range(1, 6)]
line = st.text(min_size=1, max_size=30).filter(lambda s: ";" not in s)
# a lone "None" line would read back as the None marker
output_lines = st.lists(line, max_size=8).filter(lambda ls: ";".join(ls).strip() != "None")


@st.composite
def responses(draw):
    reasons = draw(st.text(max_size=40))
    if draw(st.integers(0, 9)) == 0:
        return EnsembleResponse(reasons, None, None)
    return EnsembleResponse(reasons, draw(st.sampled_from(KEYS)), tuple(draw(output_lines)))


@given(responses())
def test_round_trip(resp):
    assert parse_response(resp.to_json(), KEYS) == resp


@given(responses())
def test_output_none_iff_closest_none(resp):
    parsed = parse_response(resp.to_json())
    assert (parsed.output is None) == (parsed.closest_prediction is None)


def test_none_marker_forms():
    for closest, output in (("None", "None"), (None, None), ("None", None), (" None ", "None")):
        raw = json.dumps({"reasons": "junk", "closest_prediction": closest, "output": output})
        assert parse_response(raw).is_none


def test_none_marker_mismatch_is_schema_error():
    with pytest.raises(ResponseSchemaError):
        parse_response('{"reasons": "", "closest_prediction": "None", "output": "a;b"}')
    with pytest.raises(ResponseSchemaError):
        parse_response('{"reasons": "", "closest_prediction": "prediction_1", "output": "None"}')
    with pytest.raises(ResponseSchemaError):
        EnsembleResponse("", None, ("x",))


def test_parse_tolerates_prose_and_fences():
    raw = 'Sure! ```json\n{"reasons": ["a", "b"], "closest_prediction": "prediction_2", "output": ["x", "y"]}\n``` bye {'
    r = parse_response(raw, ["prediction_1", "prediction_2"])
    assert r.reasons == "a;b" and r.closest_prediction == "prediction_2" and r.output == ("x", "y")


def test_parse_errors():
    with pytest.raises(ResponseParseError):
        parse_response("no json here {nope")
    with pytest.raises(ResponseSchemaError):
        parse_response('{"reasons": "", "output": "x"}')
    with pytest.raises(ResponseSchemaError):
        parse_response('{"reasons": "", "closest_prediction": "prediction_9", "output": "x"}', KEYS[:3])
    with pytest.raises(ResponseSchemaError):
        parse_response('{"reasons": "", "closest_prediction": 3, "output": "x"}')
    assert extract_json_object('[1] {"a": {"b": 2}}') == {"a": {"b": 2}}


def test_serialize_predictions():
    pset = PredictionSet.from_lines([["a; b", "  c   d "], ["e"]])
    assert json.loads(serialize_predictions(pset)) == {"prediction_1": "a, b;c d", "prediction_2": "e"}
    with pytest.raises(ValueError):
        serialize_predictions(PredictionSet.from_lines([["a"], []]))
    with pytest.raises(ValueError):
        PredictionSet((("prediction_2", ("a",)),))


def test_prompt_modes():
    bench = build_instruction_prompt(PromptMode("benchmark", "fr"))
    data = build_instruction_prompt(PromptMode("dataset", "fr"))
    assert '"None"' not in bench and "French" not in bench
    assert '"None"' in data and data.rstrip().endswith("The language of the input lyrics is French.")
    assert "${" not in bench + data
    messages = build_messages(PredictionSet.from_lines([["a"], ["b"]]), PromptMode())
    assert [m["role"] for m in messages] == ["system", "user"]


class Scripted:
    """Chat client answering from a fixed list and recording requests."""

    def __init__(self, *replies):
        self.replies = list(replies)
        self.requests = []

    def complete(self, messages, temperature=0.0):
        self.requests.append((messages, temperature))
        return self.replies.pop(0)


PSET = PredictionSet.from_lines([["hello world", "bye"], ["hallo world", "bye"], ["x"]])
GOOD = EnsembleResponse("2 is best", "prediction_2", ("hallo world", "bye")).to_json()


def test_ensemble_accepts_first_valid_reply():
    client = Scripted(GOOD)
    out = ensemble(PSET, PromptMode(), client)
    assert out.status is EnsembleStatus.OK and out.lines == ("hallo world", "bye") and out.attempts == 1
    assert client.requests[0][1] == 0.0


def test_ensemble_retries_then_succeeds():
    bad_key = EnsembleResponse("", "prediction_7", ("x",)).to_json()
    empty = EnsembleResponse("", "prediction_1", ()).to_json()
    out = ensemble(PSET, PromptMode(), Scripted("garbage", bad_key, empty, GOOD))
    assert out.status is EnsembleStatus.OK and out.attempts == 4


@pytest.mark.parametrize("mode, status, lines", [
    ("benchmark", EnsembleStatus.FALLBACK, ("hello world", "bye")),
    ("dataset", EnsembleStatus.INVALID, ()),
])
def test_ensemble_exhausted_retries(mode, status, lines):
    client = Scripted(*["garbage"] * 4)
    out = ensemble(PSET, PromptMode(mode), client)
    assert (out.status, out.lines, out.attempts) == (status, lines, 4)
    assert client.replies == []


@pytest.mark.parametrize("mode", ["benchmark", "dataset"])
def test_none_answer_is_invalid(mode):
    out = ensemble(PSET, PromptMode(mode), MockChatBackend.with_policy("none"))
    assert out.status is EnsembleStatus.INVALID and out.lines == ()


def test_ensemble_needs_two_candidates():
    with pytest.raises(ValueError):
        ensemble(PredictionSet.from_lines([["a"]]), PromptMode(), Scripted(GOOD))


def test_transport_errors_propagate():
    class Down:
        def complete(self, messages, temperature=0.0):
            raise TransportError("down")

    with pytest.raises(TransportError):
        ensemble(PSET, PromptMode(), Down())


@given(st.randoms(use_true_random=False), st.sampled_from(["first", "min_wer"]))
def test_never_fabricates(rng, policy):
    cands = [[" ".join(rng.choices("ab", k=3)) for _ in range(rng.randint(1, 3))] for _ in range(3)]
    pset = PredictionSet.from_lines(cands)
    out = ensemble(pset, PromptMode(), MockChatBackend.with_policy(policy, references=["a a a"]))
    assert [pset.lines(k) for k in pset.keys].count(list(out.lines)) >= 1
    assert out.chosen_key in pset.keys


def test_min_wer_mock_matches_best_candidate():
    for pset, truth in gt_corpus(30, seed=4):
        ref = " ".join(truth)
        client = MockChatBackend.with_policy("min_wer", references=[ref])
        out = ensemble(pset, PromptMode(), client)
        wer = lambda lines: word_error_rate(tokenize(normalize_text(ref)), tokenize(normalize_text(" ".join(lines)))).wer
        assert wer(out.lines) == min(wer(pset.lines(k)) for k in pset.keys)


def test_mock_scripted_digest_wins_and_unscripted_without_policy_fails():
    messages = build_messages(PSET, PromptMode())
    client = MockChatBackend({"responses": {request_digest(messages): GOOD}})
    assert client.complete(messages) == GOOD
    assert client.calls == [messages]
    with pytest.raises(ProtocolError):
        client.complete(build_messages(PSET, PromptMode("dataset")))
    with pytest.raises(ProtocolError):
        MockChatBackend.with_policy("min_wer").complete(messages)


def test_gt_experiment_min_wer_selects_truth():
    corpus = gt_corpus(20, seed=0)
    client = MockChatBackend.with_policy("min_wer", references=[" ".join(t) for _, t in corpus])
    result = gt_selection_experiment(corpus, PromptMode(), client, rng=0)
    assert result.rate == 1.0 and result.scored == 20


def test_gt_experiment_first_policy_hits_by_position_only():
    corpus = gt_corpus(400, seed=2, n_candidates=3)
    result = gt_selection_experiment(corpus, PromptMode(), MockChatBackend.with_policy("first"), rng=3)
    assert result.selected == result.positions.count(0)
    assert result.rate == pytest.approx(0.25, abs=0.06)


def test_gt_experiment_excludes_transport_failures():
    class Flaky:
        def __init__(self):
            self.n = 0

        def complete(self, messages, temperature=0.0):
            self.n += 1
            if self.n == 2:
                raise TransportError("timeout")
            return MockChatBackend.with_policy("first").complete(messages)

    result = gt_selection_experiment(gt_corpus(5), PromptMode(), Flaky())
    assert result.scored == 4 and [i for i, _ in result.excluded] == [1]
    assert result.to_dict()["excluded"][0]["reason"] == "timeout"


def test_rate_limiter_spaces_calls():
    now = [0.0]
    sleeps = []

    def sleep(s):
        sleeps.append(s)
        now[0] += s

    limiter = RateLimiter(60, clock=lambda: now[0], sleep=sleep)
    for _ in range(4):
        limiter.acquire()
    assert sleeps == pytest.approx([1.0, 1.0, 1.0])
    now[0] += 10
    limiter.acquire()
    assert len(sleeps) == 3
