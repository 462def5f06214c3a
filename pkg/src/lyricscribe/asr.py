"""Speech recognition backends.

Two adapters share one interface: :class:`HttpAsrBackend` talks to a remote
service over the JSON wire contract, :class:`MockAsrBackend` replays a script
file and logs every call. Both are safe to share between worker threads.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Protocol

from ._http import post_json
from .errors import InputError, ProtocolError

logger = logging.getLogger(__name__)

DEFAULT_NO_SPEECH_THRESHOLD = 0.9


@dataclass(frozen=True)
class TranscriptSegment:
    start_s: float
    end_s: float
    text: str
    no_speech_prob: float = 0.0

    def __post_init__(self):
        if not 0 <= self.start_s < self.end_s:
            raise ValueError(f"bad segment span [{self.start_s}, {self.end_s}]")
        if not 0.0 <= self.no_speech_prob <= 1.0:
            raise ValueError(f"no_speech_prob {self.no_speech_prob} outside [0, 1]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def to_dict(self) -> dict:
        return {
            "start": self.start_s,
            "end": self.end_s,
            "text": self.text,
            "no_speech_prob": self.no_speech_prob,
        }


@dataclass(frozen=True)
class TranscriptPrediction:
    segments: tuple[TranscriptSegment, ...]
    detected_language: str
    run_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        starts = [s.start_s for s in self.segments]
        if starts != sorted(starts):
            raise ValueError("segments must be sorted by start time")
        if self.run_index < 0:
            raise ValueError("run_index must be non-negative")

    def lines(self) -> list[str]:
        """Non-blank segment texts, stripped."""
        return [s.text.strip() for s in self.segments if s.text.strip()]

    @property
    def end_s(self) -> float:
        return max((s.end_s for s in self.segments), default=0.0)


@dataclass(frozen=True)
class AsrRequest:
    audio_ref: str
    prompt: str
    language_hint: str | None = None
    run_index: int = 0
    # (start_s, end_s) to transcribe only part of the track
    span: tuple[float, float] | None = None


class AsrBackend(Protocol):
    def detect_language(self, audio_ref: str) -> tuple[str, float]: ...

    def transcribe(self, request: AsrRequest) -> TranscriptPrediction: ...


def _load_prompt_table() -> dict[str, str]:
    text = resources.files("lyricscribe").joinpath("resources/prompts.json").read_text("utf-8")
    return json.loads(text)


PROMPT_TRANSLATIONS: dict[str, str] = _load_prompt_table()


def localized_prompt(language: str | None) -> str:
    """Prefix prompt for *language*: the translated word for "lyrics" plus a colon.

    Unknown languages fall back to the English prompt.
    """
    word = PROMPT_TRANSLATIONS.get((language or "").lower(), PROMPT_TRANSLATIONS["en"])
    return f"{word}:"


def filter_segments(
    prediction: TranscriptPrediction, threshold: float = DEFAULT_NO_SPEECH_THRESHOLD
) -> TranscriptPrediction:
    """Drop segments whose no-speech probability is strictly above *threshold*."""
    kept = tuple(s for s in prediction.segments if s.no_speech_prob <= threshold)
    return replace(prediction, segments=kept)


def prediction_from_body(body: dict, run_index: int = 0) -> TranscriptPrediction:
    """Build a prediction from a ``/transcribe`` response body.

    Zero-length or malformed segments are skipped; a body without a segment
    list is a protocol error.
    """
    try:
        raw_segments = body["segments"]
        language = body.get("language") or "en"
    except (KeyError, TypeError, AttributeError) as e:
        raise ProtocolError(f"transcription response lacks segments: {body!r:.200}") from e
    segments = []
    for raw in raw_segments:
        try:
            segments.append(
                TranscriptSegment(
                    start_s=float(raw["start"]),
                    end_s=float(raw["end"]),
                    text=str(raw.get("text", "")),
                    no_speech_prob=float(raw.get("no_speech_prob", 0.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            logger.debug("skipping malformed segment %r: %s", raw, e)
    segments.sort(key=lambda s: s.start_s)
    return TranscriptPrediction(tuple(segments), language, run_index)


class HttpAsrBackend:
    """Client for a transcription service.

    With ``upload_audio`` set, local files are sent base64-encoded; otherwise
    ``audio_ref`` is passed through as a path the server can read.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        api_key: str | None = None,
        timeout: float = 600.0,
        retries: int = 3,
        backoff: float = 1.0,
        upload_audio: bool = False,
    ):
        self.endpoint = endpoint.rstrip("/")
        self._api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.upload_audio = upload_audio

    def __repr__(self):
        return f"HttpAsrBackend({self.endpoint!r})"

    def _audio_field(self, audio_ref: str) -> str:
        if not self.upload_audio:
            return audio_ref
        try:
            data = Path(audio_ref).read_bytes()
        except OSError as e:
            raise InputError(f"cannot read audio {audio_ref}: {e}") from e
        return base64.b64encode(data).decode("ascii")

    def _post(self, route: str, payload: dict) -> dict:
        return post_json(
            f"{self.endpoint}{route}",
            payload,
            api_key=self._api_key,
            timeout=self.timeout,
            retries=self.retries,
            backoff=self.backoff,
        )

    def detect_language(self, audio_ref: str) -> tuple[str, float]:
        body = self._post("/detect_language", {"audio": self._audio_field(audio_ref)})
        try:
            return str(body["language"]), float(body["probability"])
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"bad /detect_language response: {body!r:.200}") from e

    def transcribe(self, request: AsrRequest) -> TranscriptPrediction:
        payload = {
            "audio": self._audio_field(request.audio_ref),
            "prompt": request.prompt,
            "language": request.language_hint,
            "seed": request.run_index,
        }
        if request.span is not None:
            payload["start"], payload["end"] = request.span
        return prediction_from_body(self._post("/transcribe", payload), request.run_index)


@dataclass
class MockAsrBackend:
    """Scripted backend.

    The script maps each audio ref to its responses::

        {
          "detect_language": {"song.wav": {"language": "fr", "probability": 0.98}},
          "transcribe": {
            "song.wav": [<body for run 0>, <body for run 1>, ...]
          },
          "spans": {"song.wav": {"12.000-15.500": "Thank you."}}
        }

    A ``transcribe`` entry may also be ``{"runs": [...], "unprompted_runs": [...]}``
    to script a prompt-sensitive backend. Run indices past the end of the list
    wrap around. Span requests use the ``spans`` table when it has the key and
    otherwise return the run-0 segments overlapping the span. Unknown audio
    refs raise :class:`InputError`.
    """

    script: dict
    calls: list[tuple[str, object]] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "MockAsrBackend":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def _log(self, method: str, arg):
        with self._lock:
            self.calls.append((method, arg))

    def detect_language(self, audio_ref: str) -> tuple[str, float]:
        self._log("detect_language", audio_ref)
        table = self.script.get("detect_language", {})
        if audio_ref in table:
            entry = table[audio_ref]
            return entry["language"], float(entry["probability"])
        if audio_ref not in self.script.get("transcribe", {}):
            raise InputError(f"unreadable audio: {audio_ref}")
        return "en", 1.0

    def _runs(self, audio_ref: str, prompted: bool) -> list[dict]:
        try:
            entry = self.script["transcribe"][audio_ref]
        except KeyError:
            raise InputError(f"unreadable audio: {audio_ref}") from None
        if isinstance(entry, dict):
            if not prompted and "unprompted_runs" in entry:
                return entry["unprompted_runs"]
            return entry["runs"]
        return entry

    def transcribe(self, request: AsrRequest) -> TranscriptPrediction:
        self._log("transcribe", request)
        runs = self._runs(request.audio_ref, bool(request.prompt))
        if request.span is None:
            body = runs[request.run_index % len(runs)]
            return prediction_from_body(body, request.run_index)
        start, end = request.span
        spans = self.script.get("spans", {}).get(request.audio_ref, {})
        key = f"{start:.3f}-{end:.3f}"
        if key in spans:
            text = spans[key]
        else:
            base = prediction_from_body(runs[0])
            text = " ".join(
                s.text.strip() for s in base.segments if s.start_s < end and s.end_s > start
            )
        segment = TranscriptSegment(0.0, end - start, text, 0.0)
        return TranscriptPrediction((segment,), runs[0].get("language", "en"), request.run_index)

    def transcribe_calls(self) -> list[AsrRequest]:
        with self._lock:
            return [arg for method, arg in self.calls if method == "transcribe"]
