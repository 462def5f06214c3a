"""
Choosing among several transcripts with a chat model
====================================================

Sampling the recognizer several times gives candidates with different
mistakes. A chat model is shown all of them as JSON and asked which is
closest to the true lyrics. This demo walks through the request, the reply
format and the retry rules, using a scripted client instead of a real API.
"""

######################################################################
# The request
# -----------

from lyricscribe.ensemble import (
    EnsembleResponse,
    MockChatBackend,
    PredictionSet,
    PromptMode,
    build_messages,
    ensemble,
    parse_response,
)

pset = PredictionSet.from_lines(
    [
        ["is this the real life", "is this just fantasy"],
        ["is this the real life", "is this just fanta sea"],
        ["is it the real wife", "is this just fantasy"],
    ]
)
messages = build_messages(pset, PromptMode("dataset", "en"))
print(messages[0]["content"][-200:])
print(messages[1]["content"])

######################################################################
# Replies
# -------
#
# Replies are parsed leniently: prose and code fences around the JSON are
# ignored. ``"None"`` in both fields means every candidate is nonsense.

reply = 'Sure.\n```json\n{"reasons": "1 is clean", "closest_prediction": "prediction_1", "output": "a;b"}\n```'
print(parse_response(reply, pset.keys))
print(parse_response('{"reasons": "noise", "closest_prediction": "None", "output": "None"}'))

######################################################################
# Running the ensemble
# --------------------
#
# The ``min_wer`` policy makes the mock behave like an ideal judge: it picks
# the candidate with the lowest WER against a reference.

judge = MockChatBackend.with_policy("min_wer", references=["is this the real life is this just fantasy"])
outcome = ensemble(pset, PromptMode("benchmark"), judge)
print(outcome.status, outcome.chosen_key, outcome.lines)

######################################################################
# A client that never produces valid JSON is retried three times. Benchmark
# mode then falls back to the first candidate; dataset mode gives up on the
# track.

garbage = MockChatBackend.with_policy("garbage")
print(ensemble(pset, PromptMode("benchmark"), garbage).status)
print(ensemble(pset, PromptMode("dataset"), garbage).status)
print("requests sent:", len(garbage.calls))

print(EnsembleResponse("why", "prediction_2", ("x", "y")).to_json())
