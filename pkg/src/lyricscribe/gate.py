"""Track-level vocal gate driven by audio-tagging probabilities."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Protocol

from ._http import post_json
from .errors import InputError, ProtocolError

DEFAULT_GATE_THRESHOLD = 0.07


def _default_tags() -> frozenset[str]:
    text = resources.files("lyricscribe").joinpath("resources/vocal_tags.json").read_text("utf-8")
    return frozenset(json.loads(text))


DEFAULT_VOCAL_TAGS = _default_tags()


@dataclass(frozen=True)
class TagScores:
    scores: Mapping[str, float]

    def __post_init__(self):
        for tag, p in self.scores.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability for {tag!r} outside [0, 1]: {p}")

    def get(self, tag: str) -> float:
        return self.scores.get(tag, 0.0)


@dataclass(frozen=True)
class GateConfig:
    vocal_tags: frozenset[str] = DEFAULT_VOCAL_TAGS
    threshold: float = DEFAULT_GATE_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "vocal_tags", frozenset(self.vocal_tags))
        if not self.vocal_tags:
            raise ValueError("vocal_tags must not be empty")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie strictly between 0 and 1")


def vocal_score(scores: TagScores, config: GateConfig) -> float:
    """Strongest vocal cue: the max over the configured vocal tags (missing tags count 0)."""
    return max(scores.get(tag) for tag in config.vocal_tags)


def is_vocal(scores: TagScores, config: GateConfig | None = None) -> bool:
    config = config or GateConfig()
    return vocal_score(scores, config) >= config.threshold


class TaggerBackend(Protocol):
    def tag(self, audio_ref: str) -> TagScores: ...


def tag(audio_ref: str, client: TaggerBackend) -> TagScores:
    return client.tag(audio_ref)


def _scores_from_body(body) -> TagScores:
    try:
        return TagScores({str(k): float(v) for k, v in body["scores"].items()})
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        raise ProtocolError(f"bad /tag response: {body!r:.200}") from e


class HttpTaggerBackend:
    def __init__(self, endpoint: str, *, api_key: str | None = None, timeout: float = 300.0, retries: int = 3, backoff: float = 1.0):
        self.endpoint = endpoint.rstrip("/")
        self._api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def __repr__(self):
        return f"HttpTaggerBackend({self.endpoint!r})"

    def tag(self, audio_ref: str) -> TagScores:
        body = post_json(
            f"{self.endpoint}/tag",
            {"audio": audio_ref},
            api_key=self._api_key,
            timeout=self.timeout,
            retries=self.retries,
            backoff=self.backoff,
        )
        return _scores_from_body(body)


@dataclass
class MockTaggerBackend:
    """Replays ``{audio_ref: {"scores": {tag: p}}}``; unknown refs raise InputError."""

    script: dict
    calls: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "MockTaggerBackend":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def tag(self, audio_ref: str) -> TagScores:
        with self._lock:
            self.calls.append(audio_ref)
        if audio_ref not in self.script:
            raise InputError(f"unreadable audio: {audio_ref}")
        return _scores_from_body(self.script[audio_ref])
