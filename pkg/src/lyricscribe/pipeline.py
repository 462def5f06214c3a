"""Per-track transcription flow and resumable dataset construction.

A track goes through: vocal gate, language identification, localized prompt,
several recognizer runs, no-speech segment filtering, LLM ensembling, and in
dataset mode a length check, timestamp alignment, a character-rate check and
a second recognizer pass that drops lines heard as "Thank you.".

:func:`build_dataset` runs that over a corpus with a worker pool, journals
finished tracks so a killed run can resume, and writes the dataset in corpus
order so the output does not depend on scheduling.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .align import (
    DEFAULT_ALIGN_THRESHOLD,
    DEFAULT_MAX_CHAR_RATE,
    AlignedLine,
    align_lines,
    char_rate_ok,
)
from .asr import (
    DEFAULT_NO_SPEECH_THRESHOLD,
    AsrBackend,
    AsrRequest,
    TranscriptPrediction,
    filter_segments,
    localized_prompt,
)
from .ensemble import (
    ChatBackend,
    EnsembleOutcome,
    EnsembleStatus,
    PredictionSet,
    PromptMode,
    ensemble,
)
from .errors import BackendError, JournalError
from .gate import GateConfig, TaggerBackend, is_vocal, vocal_score
from .textnorm import NormalizationRules, normalize_text

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.jsonl"
MANIFEST_FILE = "manifest.json"
JOURNAL_FILE = "journal.txt"
RECORDS_FILE = "records.jsonl"
DEFAULT_LICENSE = "CC BY-NC-SA 4.0"
THANK_YOU = "thank you"


@dataclass(frozen=True)
class PipelineConfig:
    num_runs: int = 3
    no_speech_threshold: float = DEFAULT_NO_SPEECH_THRESHOLD
    align_threshold: float = DEFAULT_ALIGN_THRESHOLD
    max_char_rate: float = DEFAULT_MAX_CHAR_RATE
    gate: GateConfig = field(default_factory=GateConfig)
    min_total_words: int = 10
    max_total_words: int = 2000
    mode: str = "dataset"
    worker_count: int = 1
    use_prompt: bool = True
    use_ensemble: bool = True
    license: str = DEFAULT_LICENSE

    def __post_init__(self):
        if not 3 <= self.num_runs <= 5:
            raise ValueError("num_runs must be between 3 and 5")
        if not 0.0 <= self.no_speech_threshold <= 1.0:
            raise ValueError("no_speech_threshold must be a probability")
        if not 0.0 <= self.align_threshold <= 1.0:
            raise ValueError("align_threshold must lie in [0, 1]")
        if self.max_char_rate <= 0:
            raise ValueError("max_char_rate must be positive")
        if not 0 <= self.min_total_words <= self.max_total_words:
            raise ValueError("need 0 <= min_total_words <= max_total_words")
        if self.mode not in ("benchmark", "dataset"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.worker_count < 1:
            raise ValueError("worker_count must be at least 1")

    @property
    def is_dataset(self) -> bool:
        return self.mode == "dataset"


@dataclass
class Backends:
    asr: AsrBackend
    chat: ChatBackend | None = None
    tagger: TaggerBackend | None = None


class TrackStatus(enum.Enum):
    OK = "ok"
    GATED = "gated"
    INVALID = "invalid"
    ERROR = "error"
    LENGTH_FILTERED = "length_filtered"
    EMPTY = "empty"


@dataclass
class TrackResult:
    """Everything known about one track after :func:`transcribe_track`."""

    track_id: str
    status: TrackStatus
    language: str | None = None
    lines: list[str] = field(default_factory=list)
    predictions: list[TranscriptPrediction] = field(default_factory=list)
    candidate_runs: list[int] = field(default_factory=list)
    outcome: EnsembleOutcome | None = None
    reason: str = ""
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is TrackStatus.OK

    def source_prediction(self) -> TranscriptPrediction | None:
        """Filtered run whose candidate the ensemble chose (run 0 without ensembling)."""
        if not self.candidate_runs:
            return self.predictions[0] if self.predictions else None
        key = self.outcome.chosen_key if self.outcome else None
        index = int(key.rsplit("_", 1)[1]) - 1 if key else 0
        return self.predictions[self.candidate_runs[index]]


def _invalid(result: TrackResult, reason: str) -> TrackResult:
    result.status = TrackStatus.INVALID
    result.reason = reason
    return result


def transcribe_track(
    audio_ref: str,
    config: PipelineConfig,
    backends: Backends,
    *,
    track_id: str | None = None,
    language: str | None = None,
) -> TrackResult:
    """Gate, transcribe several times and ensemble one track.

    *language* skips identification when the corpus already knows it.
    Backend failures come back as ``TrackStatus.ERROR`` rather than raising.
    """
    result = TrackResult(track_id or audio_ref, TrackStatus.OK)
    try:
        return _transcribe_track(audio_ref, config, backends, result, language)
    except BackendError as e:
        logger.warning("track %s failed: %s", result.track_id, e)
        result.status = TrackStatus.ERROR
        result.reason = f"{type(e).__name__}: {e}"
        return result


def _transcribe_track(audio_ref, config, backends, result, language):
    if config.is_dataset:
        if backends.tagger is None:
            raise ValueError("dataset mode needs a tagging backend for the vocal gate")
        scores = backends.tagger.tag(audio_ref)
        result.info["vocal_score"] = vocal_score(scores, config.gate)
        if not is_vocal(scores, config.gate):
            result.status = TrackStatus.GATED
            result.reason = "below vocal threshold"
            return result

    if language:
        result.info["language_source"] = "manifest"
    else:
        language, confidence = backends.asr.detect_language(audio_ref)
        result.info["language_source"] = "detected"
        result.info["language_confidence"] = confidence
    result.language = language
    prompt = localized_prompt(language) if config.use_prompt else ""

    runs = config.num_runs if config.use_ensemble else 1
    raw_end = 0.0
    for run in range(runs):
        raw = backends.asr.transcribe(AsrRequest(audio_ref, prompt, language, run))
        result.predictions.append(filter_segments(raw, config.no_speech_threshold))
        raw_end = max(raw_end, raw.end_s)
    result.info["raw_end_s"] = raw_end

    candidates = [(i, p.lines()) for i, p in enumerate(result.predictions) if p.lines()]
    if not candidates:
        return _invalid(result, "no speech left in any run")
    if not config.use_ensemble:
        result.candidate_runs = [candidates[0][0]]
        result.lines = candidates[0][1]
        return result
    if len(candidates) == 1:
        if config.is_dataset:
            return _invalid(result, "only one run has speech")
        result.candidate_runs = [candidates[0][0]]
        result.lines = candidates[0][1]
        return result
    if backends.chat is None:
        raise ValueError("ensembling needs a chat backend")

    result.candidate_runs = [i for i, _ in candidates]
    pset = PredictionSet.from_lines([lines for _, lines in candidates], language)
    outcome = ensemble(pset, PromptMode(config.mode, language), backends.chat)
    result.outcome = outcome
    if outcome.status is EnsembleStatus.INVALID:
        return _invalid(result, "ensemble judged all predictions invalid")
    result.lines = list(outcome.lines)
    return result


def length_filter(lines: Sequence[str], config: PipelineConfig) -> bool:
    """Total word count within ``[min_total_words, max_total_words]``, bounds inclusive."""
    words = sum(len(line.split()) for line in lines)
    return config.min_total_words <= words <= config.max_total_words


def thank_you_filter(
    aligned: Sequence[AlignedLine],
    audio_ref: str,
    asr: AsrBackend,
    *,
    prompt: str = "",
    language: str | None = None,
) -> tuple[list[AlignedLine], list[AlignedLine]]:
    """Re-transcribe each line's span and drop lines heard as exactly "Thank you.".

    Lines whose second pass fails are kept. Returns ``(kept, flagged)``.
    """
    rules = NormalizationRules(language="en")
    kept, flagged = [], []
    for line in aligned:
        request = AsrRequest(audio_ref, prompt, language, 0, span=(line.start_s, line.end_s))
        try:
            second = asr.transcribe(request)
        except BackendError as e:
            logger.warning("second pass failed for %s [%.2f-%.2f]: %s", audio_ref, line.start_s, line.end_s, e)
            kept.append(line)
            flagged.append(line)
            continue
        heard = normalize_text(" ".join(s.text for s in second.segments), rules)
        if heard != THANK_YOU:
            kept.append(line)
    return kept, flagged


@dataclass(frozen=True)
class CorpusTrack:
    track_id: str
    audio: str
    language: str | None = None
    ref_lyrics: str | None = None


def read_corpus_manifest(path: str | os.PathLike) -> tuple[list[CorpusTrack], int]:
    """Parse a JSONL corpus manifest; returns the tracks and the count of skipped lines."""
    tracks, skipped, seen = [], 0, set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                track = CorpusTrack(
                    track_id=str(obj["track_id"]),
                    audio=str(obj["audio"]),
                    language=obj.get("language"),
                    ref_lyrics=obj.get("ref_lyrics"),
                )
                if track.track_id in seen:
                    raise ValueError(f"duplicate track_id {track.track_id}")
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError) as e:
                logger.warning("%s:%d: skipping manifest line (%s)", path, lineno, e)
                skipped += 1
                continue
            seen.add(track.track_id)
            tracks.append(track)
    return tracks, skipped


def process_track(track: CorpusTrack, config: PipelineConfig, backends: Backends) -> dict:
    """Run the full dataset flow on one track and return its journal record."""
    result = transcribe_track(
        track.audio, config, backends, track_id=track.track_id, language=track.language
    )
    record = {
        "track_id": track.track_id,
        "status": result.status.value,
        "reason": result.reason,
        "language": result.language,
        "entry": None,
        "lines": {},
    }
    if not result.ok:
        return record
    if not length_filter(result.lines, config):
        record["status"] = TrackStatus.LENGTH_FILTERED.value
        record["reason"] = "total word count out of range"
        return record

    rules = NormalizationRules.for_language(result.language)
    source = result.source_prediction()
    aligned, dropped = align_lines(source.segments, result.lines, config.align_threshold, rules)
    paced = [line for line in aligned if char_rate_ok(line, config.max_char_rate, rules)]
    prompt = localized_prompt(result.language) if config.use_prompt else ""
    kept, flagged = thank_you_filter(paced, track.audio, backends.asr, prompt=prompt, language=result.language)
    counters = {
        "final_lines": len(result.lines),
        "aligned": len(aligned),
        "dropped_alignment": len(dropped),
        "dropped_char_rate": len(aligned) - len(paced),
        "dropped_thank_you": len(paced) - len(kept),
        "second_pass_flagged": len(flagged),
        "kept": len(kept),
    }
    record["lines"] = counters
    if not kept:
        record["status"] = TrackStatus.EMPTY.value
        record["reason"] = "no line survived alignment and filtering"
        return record

    outcome = result.outcome
    chosen = outcome.chosen_key if outcome else "prediction_1"
    corrected = bool(outcome and outcome.response and list(outcome.lines) != source.lines())
    record["entry"] = {
        "track_id": track.track_id,
        "language": result.language,
        "duration_s": result.info.get("raw_end_s", source.end_s),
        "lines": [line.to_dict() for line in kept],
        "provenance": {
            "num_runs": config.num_runs,
            "candidates": len(result.candidate_runs),
            "closest_prediction": chosen,
            "corrected": corrected,
            "ensemble_attempts": outcome.attempts if outcome else 0,
            "language_source": result.info.get("language_source"),
            "line_counters": counters,
        },
        "license": config.license,
    }
    return record


def _stage(n_in: int, n_out: int, dropped: dict[str, int]) -> dict:
    return {"in": n_in, "out": n_out, "dropped": dict(sorted(dropped.items()))}


def summarize(records: Sequence[dict], config: PipelineConfig, skipped_manifest_lines: int = 0) -> dict:
    """Run manifest: per-stage in/out/dropped counts plus dataset statistics."""
    status = Counter(r["status"] for r in records)

    n = len(records)
    errored = status[TrackStatus.ERROR.value]
    gated = status[TrackStatus.GATED.value]
    invalid = status[TrackStatus.INVALID.value]
    length_filtered = status[TrackStatus.LENGTH_FILTERED.value]
    empty = status[TrackStatus.EMPTY.value]
    ok = status[TrackStatus.OK.value]

    after_gate = n - gated - errored
    after_ensemble = after_gate - invalid
    after_length = after_ensemble - length_filtered
    track_stages = {
        "gate_and_transcription": _stage(n, after_gate, {"gated_out": gated, "backend_error": errored}),
        "ensemble": _stage(after_gate, after_ensemble, {"invalid": invalid}),
        "length_filter": _stage(after_ensemble, after_length, {"length_filtered": length_filtered}),
        "line_filters": _stage(after_length, ok, {"no_lines_left": empty}),
    }

    line_totals: Counter = Counter()
    for r in records:
        line_totals.update(r.get("lines") or {})
    aligned = line_totals["aligned"]
    paced = aligned - line_totals["dropped_char_rate"]
    line_stages = {
        "alignment": _stage(line_totals["final_lines"], aligned, {"above_threshold": line_totals["dropped_alignment"]}),
        "char_rate": _stage(aligned, paced, {"too_fast": line_totals["dropped_char_rate"]}),
        "thank_you": _stage(paced, line_totals["kept"], {"thank_you": line_totals["dropped_thank_you"]}),
    }

    entries = [r["entry"] for r in records if r["entry"]]
    per_language: dict[str, dict] = defaultdict(lambda: {"songs": 0, "lines": 0, "duration_s": 0.0})
    for e in entries:
        stats = per_language[e["language"]]
        stats["songs"] += 1
        stats["lines"] += len(e["lines"])
        stats["duration_s"] += e["duration_s"]
    return {
        "mode": config.mode,
        "tracks_in": n,
        "skipped_manifest_lines": skipped_manifest_lines,
        "track_stages": track_stages,
        "line_stages": line_stages,
        "second_pass_flagged": line_totals["second_pass_flagged"],
        "per_language": {k: per_language[k] for k in sorted(per_language)},
        "songs": len(entries),
        "lines": sum(len(e["lines"]) for e in entries),
        "total_duration_s": sum(e["duration_s"] for e in entries),
        "total_line_duration_s": sum(
            line["end_s"] - line["start_s"] for e in entries for line in e["lines"]
        ),
    }


def stages_conserve(manifest: dict) -> bool:
    """True when every stage satisfies in = out + dropped."""
    stages = list(manifest["track_stages"].values()) + list(manifest["line_stages"].values())
    return all(s["in"] == s["out"] + sum(s["dropped"].values()) for s in stages)


class _Journal:
    """Append-only record of finished tracks.

    ``records.jsonl`` holds the per-track results; ``journal.txt`` lists the
    ids whose record is complete. A record only counts once its id is in the
    journal, so a crash between the two writes just redoes that track.
    """

    def __init__(self, out_dir: Path):
        self.journal_path = out_dir / JOURNAL_FILE
        self.records_path = out_dir / RECORDS_FILE
        self._lock = threading.Lock()

    def reset(self):
        for p in (self.journal_path, self.records_path):
            p.unlink(missing_ok=True)

    def load(self, known_ids: Iterable[str]) -> dict[str, dict]:
        if not self.journal_path.exists():
            return {}
        known = set(known_ids)
        try:
            done = [t for t in self.journal_path.read_text("utf-8").splitlines() if t.strip()]
        except UnicodeDecodeError as e:
            raise JournalError(f"{self.journal_path} is not valid UTF-8") from e
        unknown = sorted(set(done) - known)
        if unknown:
            raise JournalError(
                f"{self.journal_path} lists {len(unknown)} track(s) not in the corpus manifest, "
                f"e.g. {unknown[:3]}; refusing to resume"
            )
        records = {}
        if self.records_path.exists():
            with open(self.records_path, encoding="utf-8") as f:
                for lineno, line in enumerate(f, 1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        records[rec["track_id"]] = rec
                    except (json.JSONDecodeError, KeyError, TypeError):
                        # a torn final write is expected after a crash
                        logger.warning("%s:%d unreadable, ignored", self.records_path, lineno)
        missing = [t for t in done if t not in records]
        if missing:
            raise JournalError(
                f"journal lists {len(missing)} track(s) without a stored record, e.g. {missing[:3]}"
            )
        return {t: records[t] for t in done}

    def commit(self, record: dict):
        with self._lock:
            with open(self.records_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            with open(self.journal_path, "a", encoding="utf-8") as f:
                f.write(record["track_id"] + "\n")


def _write_atomic(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


@dataclass
class BuildResult:
    dataset_path: Path
    manifest_path: Path
    manifest: dict
    entries: list[dict]


def build_dataset(
    corpus: Sequence[CorpusTrack],
    config: PipelineConfig,
    backends: Backends,
    out_dir: str | os.PathLike,
    *,
    resume: bool = False,
    skipped_manifest_lines: int = 0,
) -> BuildResult:
    """Process every track and write ``dataset.jsonl`` and ``manifest.json``.

    With *resume*, tracks already in the journal are not reprocessed. Output
    files are assembled in corpus order, so they are identical for any
    ``worker_count`` and for resumed versus one-shot runs when the backends are
    deterministic.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    journal = _Journal(out)
    ids = [t.track_id for t in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("corpus contains duplicate track ids")
    if resume:
        done = journal.load(ids)
        logger.info("resuming: %d of %d tracks already done", len(done), len(ids))
    else:
        journal.reset()
        done = {}

    pending = [t for t in corpus if t.track_id not in done]

    def work(track: CorpusTrack) -> dict:
        try:
            record = process_track(track, config, backends)
        except Exception as e:  # never let one track abort the batch
            logger.exception("track %s crashed", track.track_id)
            record = {
                "track_id": track.track_id,
                "status": TrackStatus.ERROR.value,
                "reason": f"{type(e).__name__}: {e}",
                "language": track.language,
                "entry": None,
                "lines": {},
            }
        journal.commit(record)
        return record

    records = dict(done)
    if config.worker_count == 1:
        for track in pending:
            records[track.track_id] = work(track)
    else:
        with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
            for record in pool.map(work, pending):
                records[record["track_id"]] = record

    ordered = [records[t] for t in ids]
    entries = [r["entry"] for r in ordered if r["entry"]]
    manifest = summarize(ordered, config, skipped_manifest_lines)
    dataset_path = out / DATASET_FILE
    manifest_path = out / MANIFEST_FILE
    _write_atomic(
        dataset_path,
        "".join(json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n" for e in entries),
    )
    _write_atomic(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return BuildResult(dataset_path, manifest_path, manifest, entries)
