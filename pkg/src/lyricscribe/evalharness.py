"""Benchmark evaluation: song-level or utterance-level WER, ablations, reports."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

from .asr import AsrRequest, filter_segments, localized_prompt
from .errors import BackendError
from .metrics import CorpusWerReport, ItemScore, WerBreakdown, corpus_wer
from .pipeline import Backends, PipelineConfig, TrackStatus, transcribe_track

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkItem:
    item_id: str
    audio_ref: str
    reference: str
    language: str = "en"
    granularity: Literal["song", "utterance"] = "song"

    def __post_init__(self):
        if self.granularity not in ("song", "utterance"):
            raise ValueError(f"unknown granularity {self.granularity!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkItem":
        return cls(
            item_id=str(d["item_id"]),
            audio_ref=str(d["audio"]),
            reference=d["reference"],
            language=d.get("language", "en"),
            granularity=d.get("granularity", "song"),
        )


def read_benchmark_manifest(path: str | os.PathLike) -> list[BenchmarkItem]:
    """JSONL with ``item_id``, ``audio``, ``reference`` (text, or ``@path`` to a text file),
    optional ``language`` and ``granularity``."""
    items = []
    base = os.path.dirname(os.fspath(path))
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                ref = d["reference"]
                if isinstance(ref, str) and ref.startswith("@"):
                    with open(os.path.join(base, ref[1:]), encoding="utf-8") as rf:
                        d["reference"] = rf.read()
                items.append(BenchmarkItem.from_dict(d))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, OSError) as e:
                raise ValueError(f"{path}:{lineno}: bad benchmark item ({e})") from e
    return items


@dataclass
class EvalReport:
    system: str
    corpus: CorpusWerReport
    ensemble: bool = True
    prompt: bool = True
    hypotheses: dict[str, str] = field(default_factory=dict)

    @property
    def mean_wer(self) -> float | None:
        return self.corpus.mean_wer

    @property
    def pooled_wer(self) -> float | None:
        return self.corpus.pooled_wer

    @property
    def per_language(self) -> dict[str, float]:
        return self.corpus.per_language

    @property
    def flagged(self) -> list[str]:
        return [s.item_id for s in self.corpus.per_item if s.flagged]

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "ablation": {"ensemble": self.ensemble, "prompt": self.prompt},
            "language_counts": self.corpus.language_counts(),
            **self.corpus.to_dict(),
        }

    def is_self_consistent(self, tol: float = 1e-12) -> bool:
        """Recompute mean and pooled WER from the serialized per-item list."""
        d = self.to_dict()
        items = [WerBreakdown.from_dict(x) for x in d["per_item"]]
        if not items:
            return d["mean_wer"] is None and d["pooled_wer"] is None
        mean = sum(b.wer for b in items) / len(items)
        pooled = sum(b.errors for b in items) / sum(b.reference_words for b in items)
        return abs(mean - d["mean_wer"]) <= tol and abs(pooled - d["pooled_wer"]) <= tol


def _hypothesis_song(item, config, backends) -> str:
    result = transcribe_track(item.audio_ref, config, backends, track_id=item.item_id, language=item.language)
    if result.status is TrackStatus.ERROR:
        raise BackendError(result.reason)
    if not result.ok:
        return ""
    return " ".join(result.lines)


def _hypothesis_utterance(item, config, backends, utterance_ensemble) -> str:
    if utterance_ensemble:
        return _hypothesis_song(item, config, backends)
    prompt = localized_prompt(item.language) if config.use_prompt else ""
    raw = backends.asr.transcribe(AsrRequest(item.audio_ref, prompt, item.language, 0))
    return " ".join(filter_segments(raw, config.no_speech_threshold).lines())


def evaluate(
    items: Sequence[BenchmarkItem],
    config: PipelineConfig,
    backends: Backends,
    *,
    system: str = "full",
    utterance_ensemble: bool = False,
) -> EvalReport:
    """Transcribe every item and score it against its reference.

    Songs run the full benchmark-mode flow. Utterances get one prompted
    transcription unless *utterance_ensemble* is set. Items whose
    transcription fails score WER 1.0 and are flagged.
    """
    config = replace(config, mode="benchmark")

    def run(item: BenchmarkItem):
        try:
            if item.granularity == "song":
                return _hypothesis_song(item, config, backends), None
            return _hypothesis_utterance(item, config, backends, utterance_ensemble), None
        except BackendError as e:
            logger.warning("item %s failed: %s", item.item_id, e)
            return "", str(e)

    if config.worker_count > 1:
        with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
            outputs = list(pool.map(run, items))
    else:
        outputs = [run(item) for item in items]

    report = corpus_wer((it.item_id, it.language, it.reference, hyp) for it, (hyp, _) in zip(items, outputs))
    failures = {it.item_id: err for it, (_, err) in zip(items, outputs) if err is not None}
    for i, score in enumerate(report.per_item):
        if score.item_id in failures:
            b = score.breakdown
            report.per_item[i] = ItemScore(
                score.item_id,
                score.language,
                WerBreakdown(0, 0, b.reference_words, b.reference_words),
                flagged=True,
                note=failures[score.item_id],
            )
    return EvalReport(
        system=system,
        corpus=report,
        ensemble=config.use_ensemble,
        prompt=config.use_prompt,
        hypotheses={it.item_id: hyp for it, (hyp, _) in zip(items, outputs)},
    )


ABLATION_CELLS = (
    ("full", True, True),
    ("w/o ensemble", False, True),
    ("w/o prompt", True, False),
    ("w/o ensemble, w/o prompt", False, False),
)


def ablation_matrix(items, config: PipelineConfig, backends: Backends, **kwargs) -> list[EvalReport]:
    """One report per {ensemble on/off} x {prompt on/off} cell."""
    return [
        evaluate(items, replace(config, use_ensemble=ens, use_prompt=prm), backends, system=label, **kwargs)
        for label, ens, prm in ABLATION_CELLS
    ]


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{100 * x:.2f}"


def render_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table: one row per system with mean and pooled WER in percent."""
    header = ("System", "Items", "WER (%)", "Pooled WER (%)")
    rows = [(r.system, str(len(r.corpus.per_item)), _pct(r.mean_wer), _pct(r.pooled_wer)) for r in reports]
    return _format(header, rows)


def render_language_table(report: EvalReport) -> str:
    """Per-language breakdown with an overall row."""
    header = ("Language", "Songs", "WER (%)")
    counts = report.corpus.language_counts()
    rows = [(lang, str(counts[lang]), _pct(w)) for lang, w in report.per_language.items()]
    rows.append(("Overall", str(len(report.corpus.per_item)), _pct(report.mean_wer)))
    return _format(header, rows)


def _format(header, rows) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    fmt = lambda cells: "  ".join(  # noqa: E731
        c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
    )
    rule = "-" * len(fmt(header))
    return "\n".join([rule, fmt(header), rule, *map(fmt, rows), rule]) + "\n"

