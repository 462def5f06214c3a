"""LLM post-processing that picks and corrects the best of several transcripts.

Candidates are sent as ``{"prediction_1": "line;line;...", ...}`` together
with a fixed instruction prompt; the reply must be a JSON object with
``reasons``, ``closest_prediction`` and ``output``. In dataset mode the prompt
also asks the model to answer ``"None"`` when every candidate is garbage.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import random
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from string import Template
from typing import Literal, Protocol, Sequence

from ._http import post_json
from .errors import (
    ProtocolError,
    ResponseParseError,
    ResponseSchemaError,
    TransportError,
)
from .metrics import edit_distance, tokenize
from .textnorm import NormalizationRules, normalize_text

logger = logging.getLogger(__name__)

NONE_MARKER = "None"
LINE_SEPARATOR = ";"
DEFAULT_PARSE_RETRIES = 3

LANGUAGE_NAMES = {
    "en": "English",
    "fr": "French",
    "es": "Spanish",
    "it": "Italian",
    "ru": "Russian",
    "de": "German",
}


def _resource(name: str) -> str:
    return resources.files("lyricscribe").joinpath(f"resources/{name}").read_text("utf-8")


_PROMPT_TEMPLATE = Template(_resource("instruction_prompt.txt").rstrip("\n"))
_DATASET_CLAUSES = json.loads(_resource("dataset_clauses.json"))


@dataclass(frozen=True)
class PromptMode:
    mode: Literal["benchmark", "dataset"] = "benchmark"
    language: str = "en"

    def __post_init__(self):
        if self.mode not in ("benchmark", "dataset"):
            raise ValueError(f"unknown prompt mode {self.mode!r}")

    @property
    def is_dataset(self) -> bool:
        return self.mode == "dataset"


def language_name(code: str) -> str:
    return LANGUAGE_NAMES.get(code.lower(), code)


def build_instruction_prompt(mode: PromptMode) -> str:
    """The system instruction; dataset mode adds the validity clauses and the language."""
    if mode.is_dataset:
        name = language_name(mode.language)
        slots = {k: Template(v).substitute(language_name=name) for k, v in _DATASET_CLAUSES.items()}
    else:
        slots = {k: "" for k in _DATASET_CLAUSES}
    return _PROMPT_TEMPLATE.substitute(slots)


def prediction_key(i: int) -> str:
    """Key for the *i*-th candidate, counting from 1."""
    return f"prediction_{i}"


@dataclass(frozen=True)
class PredictionSet:
    candidates: tuple[tuple[str, tuple[str, ...]], ...]
    language: str = "en"

    def __post_init__(self):
        cands = tuple((k, tuple(lines)) for k, lines in self.candidates)
        object.__setattr__(self, "candidates", cands)
        expected = [prediction_key(i) for i in range(1, len(cands) + 1)]
        if [k for k, _ in cands] != expected:
            raise ValueError(f"candidate keys must be {expected}")

    @classmethod
    def from_lines(cls, candidates: Sequence[Sequence[str]], language: str = "en") -> "PredictionSet":
        return cls(
            tuple((prediction_key(i), tuple(c)) for i, c in enumerate(candidates, 1)),
            language,
        )

    @property
    def keys(self) -> list[str]:
        return [k for k, _ in self.candidates]

    def lines(self, key: str) -> list[str]:
        return list(dict(self.candidates)[key])

    def __len__(self):
        return len(self.candidates)


def _clean_line(line: str) -> str:
    return " ".join(line.replace(LINE_SEPARATOR, ",").split())


def serialize_predictions(pset: PredictionSet) -> str:
    """JSON object mapping each key to its lines joined by ``;``.

    A ``;`` inside a line would split it on the way back, so it is replaced
    with ``,`` first.
    """
    if not pset.candidates:
        raise ValueError("cannot serialize an empty prediction set")
    payload = {}
    for key, lines in pset.candidates:
        if not lines:
            raise ValueError(f"{key} has no lines")
        payload[key] = LINE_SEPARATOR.join(_clean_line(line) for line in lines)
    return json.dumps(payload, ensure_ascii=False)


@dataclass(frozen=True)
class EnsembleResponse:
    reasons: str
    closest_prediction: str | None
    output: tuple[str, ...] | None

    def __post_init__(self):
        if self.output is not None:
            object.__setattr__(self, "output", tuple(self.output))
        if (self.closest_prediction is None) != (self.output is None):
            raise ResponseSchemaError("output must be None exactly when closest_prediction is None")

    @property
    def is_none(self) -> bool:
        return self.closest_prediction is None

    def to_json(self) -> str:
        return json.dumps(
            {
                "reasons": self.reasons,
                "closest_prediction": self.closest_prediction or NONE_MARKER,
                "output": NONE_MARKER if self.output is None else LINE_SEPARATOR.join(self.output),
            },
            ensure_ascii=False,
        )


def extract_json_object(raw: str) -> dict:
    """First JSON object embedded in *raw*, ignoring prose and code fences around it."""
    decoder = json.JSONDecoder()
    pos = raw.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        pos = raw.find("{", pos + 1)
    raise ResponseParseError(f"no JSON object in reply: {raw[:120]!r}")


def _is_none_marker(value) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == NONE_MARKER)


def parse_response(raw: str, keys: Sequence[str] | None = None) -> EnsembleResponse:
    """Parse and validate a chat reply.

    *keys* are the candidate keys that were sent; when given,
    ``closest_prediction`` must be one of them or ``"None"``.
    """
    obj = extract_json_object(raw)
    missing = [f for f in ("reasons", "closest_prediction", "output") if f not in obj]
    if missing:
        raise ResponseSchemaError(f"reply lacks field(s) {missing}")

    reasons = obj["reasons"]
    if isinstance(reasons, list):
        reasons = LINE_SEPARATOR.join(map(str, reasons))
    elif not isinstance(reasons, str):
        raise ResponseSchemaError("reasons must be a string")

    closest = obj["closest_prediction"]
    if _is_none_marker(closest):
        closest = None
    elif not isinstance(closest, str):
        raise ResponseSchemaError(f"closest_prediction must be a key, got {closest!r}")
    else:
        closest = closest.strip()
        if keys is not None and closest not in keys:
            raise ResponseSchemaError(f"closest_prediction {closest!r} is not one of {list(keys)}")

    output = obj["output"]
    if _is_none_marker(output):
        lines = None
    elif isinstance(output, str):
        lines = output.split(LINE_SEPARATOR) if output else []
    elif isinstance(output, list) and all(isinstance(x, str) for x in output):
        lines = list(output)
    else:
        raise ResponseSchemaError("output must be a string or a list of strings")
    return EnsembleResponse(reasons, closest, lines)


class ChatBackend(Protocol):
    def complete(self, messages: list[dict], temperature: float = 0.0) -> str: ...


class EnsembleStatus(enum.Enum):
    OK = "ok"
    INVALID = "invalid"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class EnsembleOutcome:
    status: EnsembleStatus
    lines: tuple[str, ...] = ()
    response: EnsembleResponse | None = None
    attempts: int = 0

    @property
    def chosen_key(self) -> str | None:
        return self.response.closest_prediction if self.response else None


def build_messages(pset: PredictionSet, mode: PromptMode) -> list[dict]:
    return [
        {"role": "system", "content": build_instruction_prompt(mode)},
        {"role": "user", "content": serialize_predictions(pset)},
    ]


def ensemble(
    pset: PredictionSet,
    mode: PromptMode,
    client: ChatBackend,
    *,
    retries: int = DEFAULT_PARSE_RETRIES,
    temperature: float = 0.0,
) -> EnsembleOutcome:
    """Ask the chat backend to choose among the candidates.

    Unparseable or invalid replies are retried *retries* times. When they
    keep failing, benchmark mode falls back to ``prediction_1`` and dataset
    mode declares the track invalid. A ``"None"`` answer is always invalid.
    Transport errors from the client propagate.
    """
    if len(pset) < 2:
        raise ValueError("ensembling needs at least two candidates")
    messages = build_messages(pset, mode)
    for attempt in range(1, retries + 2):
        raw = client.complete(messages, temperature=temperature)
        try:
            response = parse_response(raw, pset.keys)
        except (ResponseParseError, ResponseSchemaError) as e:
            logger.info("ensemble reply rejected (attempt %d): %s", attempt, e)
            continue
        if response.is_none:
            return EnsembleOutcome(EnsembleStatus.INVALID, (), response, attempt)
        lines = tuple(t for t in (" ".join(x.split()) for x in response.output) if t)
        if not lines:
            # an empty output is useless either way; treat like a bad reply
            logger.info("ensemble reply has empty output (attempt %d)", attempt)
            continue
        return EnsembleOutcome(EnsembleStatus.OK, lines, response, attempt)
    attempts = retries + 1
    if mode.is_dataset:
        return EnsembleOutcome(EnsembleStatus.INVALID, (), None, attempts)
    return EnsembleOutcome(EnsembleStatus.FALLBACK, tuple(pset.lines(pset.keys[0])), None, attempts)


class RateLimiter:
    """Token bucket limiting outbound calls to *per_minute* requests."""

    def __init__(self, per_minute: float, burst: int = 1, clock=time.monotonic, sleep=time.sleep):
        if per_minute <= 0:
            raise ValueError("per_minute must be positive")
        self.rate = per_minute / 60.0
        self.capacity = float(burst)
        self._tokens = float(burst)
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
            self._last = now
            if self._tokens >= 1:
                self._tokens -= 1
                return
            wait = (1 - self._tokens) / self.rate
            self._sleep(wait)
            self._last = self._clock()
            self._tokens = 0.0


class HttpChatBackend:
    """Client for ``POST /chat``; the API key comes from the environment."""

    API_KEY_ENV = "LYRICSCRIBE_CHAT_API_KEY"

    def __init__(
        self,
        endpoint: str,
        *,
        api_key: str | None = None,
        requests_per_minute: float | None = None,
        timeout: float = 300.0,
        retries: int = 3,
        backoff: float = 1.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self._api_key = api_key if api_key is not None else os.environ.get(self.API_KEY_ENV)
        self.limiter = RateLimiter(requests_per_minute) if requests_per_minute else None
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def __repr__(self):
        return f"HttpChatBackend({self.endpoint!r})"

    def complete(self, messages: list[dict], temperature: float = 0.0) -> str:
        if self.limiter:
            self.limiter.acquire()
        body = post_json(
            f"{self.endpoint}/chat",
            {"messages": messages, "temperature": temperature},
            api_key=self._api_key,
            timeout=self.timeout,
            retries=self.retries,
            backoff=self.backoff,
        )
        try:
            return str(body["content"])
        except (KeyError, TypeError) as e:
            raise ProtocolError(f"bad /chat response: {body!r:.200}") from e


def request_digest(messages: list[dict], temperature: float = 0.0) -> str:
    """Stable SHA-256 of a chat request, used as the mock script key."""
    canonical = json.dumps(
        {"messages": messages, "temperature": temperature},
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _user_candidates(messages: list[dict]) -> dict[str, str]:
    user = next(m["content"] for m in messages if m["role"] == "user")
    return json.loads(user)


@dataclass
class MockChatBackend:
    """Scripted chat backend.

    Script layout::

        {"responses": {"<request digest>": "<reply text>", ...},
         "policy": "min_wer" | "first" | "none" | "garbage"}

    Scripted digests win. Otherwise the policy answers: ``min_wer`` picks the
    candidate closest to any of ``references`` (constructor argument, or a
    ``"references"`` list in the script) by WER, ``first`` always picks
    ``prediction_1``, ``none`` answers the None marker and ``garbage`` answers
    prose without JSON. Every request is kept in ``calls``.
    """

    script: dict = field(default_factory=dict)
    references: list[str] = field(default_factory=list)
    language: str = "en"
    calls: list[list[dict]] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        if not self.references:
            self.references = list(self.script.get("references", []))

    @classmethod
    def from_file(cls, path: str | os.PathLike, **kwargs) -> "MockChatBackend":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f), **kwargs)

    @classmethod
    def with_policy(cls, policy: str, **kwargs) -> "MockChatBackend":
        return cls({"policy": policy}, **kwargs)

    @property
    def policy(self) -> str | None:
        return self.script.get("policy")

    def complete(self, messages: list[dict], temperature: float = 0.0) -> str:
        with self._lock:
            self.calls.append(messages)
        scripted = self.script.get("responses", {})
        digest = request_digest(messages, temperature)
        if digest in scripted:
            return scripted[digest]
        policy = self.policy
        if policy == "garbage":
            return "I am sorry, I cannot help with that."
        if policy == "none":
            return EnsembleResponse("all nonsense", None, None).to_json()
        candidates = _user_candidates(messages)
        if policy == "first":
            key = "prediction_1"
        elif policy == "min_wer":
            key = self._min_wer_key(candidates)
        else:
            raise ProtocolError(f"no scripted reply for request {digest[:12]}")
        reply = EnsembleResponse(f"{key} reads best", key, candidates[key].split(LINE_SEPARATOR))
        return reply.to_json()

    def _min_wer_key(self, candidates: dict[str, str]) -> str:
        if not self.references:
            raise ProtocolError("min_wer policy needs reference lyrics")
        rules = NormalizationRules.for_language(self.language)
        refs = [tokenize(normalize_text(r, rules)) for r in self.references]
        refs = [(r, Counter(r)) for r in refs if r]

        def score(key):
            hyp = tokenize(normalize_text(candidates[key].replace(LINE_SEPARATOR, " "), rules))
            bag = Counter(hyp)
            # edits >= longer length minus shared words; visit refs by that bound
            bounded = sorted(
                ((max(len(r), len(hyp)) - sum((c & bag).values())) / len(r), i)
                for i, (r, c) in enumerate(refs)
            )
            best = float("inf")
            for bound, i in bounded:
                if bound >= best:
                    break
                best = min(best, edit_distance(refs[i][0], hyp) / len(refs[i][0]))
            return best

        # ties go to the lowest key
        return min(candidates, key=lambda k: (score(k), int(k.rsplit("_", 1)[1])))


@dataclass
class GtSelectionResult:
    selected: int
    scored: int
    excluded: list[tuple[int, str]] = field(default_factory=list)
    positions: list[int] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.selected / self.scored if self.scored else 0.0

    def to_dict(self) -> dict:
        return {
            "selection_rate": self.rate,
            "selected": self.selected,
            "scored": self.scored,
            "excluded": [{"index": i, "reason": r} for i, r in self.excluded],
        }


def gt_selection_experiment(
    corpus: Sequence[tuple[PredictionSet, Sequence[str]]],
    mode: PromptMode,
    client: ChatBackend,
    rng: random.Random | int | None = 0,
) -> GtSelectionResult:
    """How often the chat model picks the ground truth once it is slipped in as a candidate.

    The ground-truth lyrics are inserted at a uniformly random position among
    the candidates (keys renumbered) before ensembling. Items that fail with a
    transport error are excluded and listed.
    """
    if not corpus:
        raise ValueError("corpus must not be empty")
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    result = GtSelectionResult(0, 0)
    for index, (pset, truth) in enumerate(corpus):
        candidates = [list(lines) for _, lines in pset.candidates]
        position = rng.randrange(len(candidates) + 1)
        candidates.insert(position, list(truth))
        augmented = PredictionSet.from_lines(candidates, pset.language)
        gt_key = prediction_key(position + 1)
        try:
            outcome = ensemble(augmented, mode, client)
        except TransportError as e:
            logger.warning("gt experiment item %d excluded: %s", index, e)
            result.excluded.append((index, str(e)))
            continue
        result.scored += 1
        result.positions.append(position)
        if outcome.chosen_key == gt_key:
            result.selected += 1
    return result
