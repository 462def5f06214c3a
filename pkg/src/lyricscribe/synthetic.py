"""Deterministic synthetic corpora for the mock backends.

Everything here is generated from a seed with :mod:`random`, so scripted
backends built from it behave identically run after run. The corpora are
shaped to exercise every pipeline stage: instrumental tracks for the gate,
watermark segments with high no-speech probability, lines sung impossibly
fast, "Thank you." hallucinations on instrumental breaks, nonsense tracks
the ensemble rejects and ensemble corrections that no segment supports.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .ensemble import EnsembleResponse, PredictionSet, PromptMode, build_messages, request_digest

WORDS = (
    "love heart night fire rain dream light dance river road home sky baby "
    "stars moon summer shadow golden wild sweet lonely forever tonight hold "
    "run fall rise burn fly free broken young city ocean song hands eyes "
    "time world morning silver thunder whisper crazy alive gone"
).split()
# never used in lyrics, so adding them to a transcript can only add errors
JUNK = "music playing subscribe applause outro instrumental".split()
WATERMARK = "Subtitles by the Amara community"
THANK_YOU = "Thank you."
NONSENSE = "la la la la"


def _line(rng: random.Random, lo: int = 4, hi: int = 7) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def corrupt(line: str, rng: random.Random, p: float) -> str:
    """Replace each word independently with probability *p*."""
    out = []
    for w in line.split():
        if rng.random() < p:
            w = rng.choice([x for x in WORDS if x != w])
        out.append(w)
    return " ".join(out)


def _body(segments, language="en") -> dict:
    return {"language": language, "segments": segments}


def _seg(start, end, text, nsp=0.05) -> dict:
    return {"start": round(start, 3), "end": round(end, 3), "text": text, "no_speech_prob": nsp}


@dataclass
class SyntheticTrack:
    track_id: str
    audio: str
    vocal: bool
    language: str
    reference: list[str]
    kind: str = "normal"
    runs: list[dict] = field(default_factory=list)


@dataclass
class SyntheticCorpus:
    tracks: list[SyntheticTrack]
    asr_script: dict
    chat_script: dict
    tagger_script: dict

    def manifest_lines(self) -> list[dict]:
        return [{"track_id": t.track_id, "audio": t.audio} for t in self.tracks]

    def write(self, directory: str | Path) -> dict[str, Path]:
        """Write manifest and the three mock scripts; returns their paths."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "manifest": d / "corpus.jsonl",
            "asr": d / "asr_script.json",
            "chat": d / "chat_script.json",
            "tagger": d / "tagger_script.json",
        }
        paths["manifest"].write_text(
            "".join(json.dumps(x) + "\n" for x in self.manifest_lines()), encoding="utf-8"
        )
        for key, payload in (("asr", self.asr_script), ("chat", self.chat_script), ("tagger", self.tagger_script)):
            paths[key].write_text(json.dumps(payload, indent=1, ensure_ascii=False), encoding="utf-8")
        return paths


LANGUAGES = ("en", "fr", "es", "it", "ru", "de")


def dataset_corpus(
    n_tracks: int = 50,
    seed: int = 0,
    *,
    vocal_fraction: float = 0.6,
    num_runs: int = 3,
    corruption: float = 0.15,
) -> SyntheticCorpus:
    """A mixed corpus for dataset construction.

    Vocal tracks are split between ordinary songs and a few special cases:
    ``nonsense`` (chat answers None), ``corrected`` (the chat output carries a
    line no segment supports), ``fast`` (one line with an absurd character
    rate), ``short`` (too few words) and ``silent`` (every segment is above the
    no-speech threshold).
    """
    rng = random.Random(seed)
    tracks: list[SyntheticTrack] = []
    asr = {"transcribe": {}, "detect_language": {}, "spans": {}}
    tagger, chat_responses = {}, {}
    kinds = ["normal"] * 6 + ["nonsense", "corrected", "fast", "short", "silent"]
    n_vocal = round(n_tracks * vocal_fraction)
    for i in range(n_tracks):
        vocal = i < n_vocal
        track_id = f"track{i:03d}"
        audio = f"audio/{track_id}.mp3"
        language = LANGUAGES[i % len(LANGUAGES)]
        if not vocal:
            tagger[audio] = {"scores": {"Music": 0.9, "Singing": round(rng.uniform(0.0, 0.06), 4)}}
            tracks.append(SyntheticTrack(track_id, audio, False, language, []))
            asr["transcribe"][audio] = [_body([_seg(0.0, 30.0, "", 0.99)], language)]
            continue
        tagger[audio] = {"scores": {"Music": 0.8, "Singing": round(rng.uniform(0.07, 0.9), 4)}}
        kind = kinds[i % len(kinds)]
        n_lines = 1 if kind == "short" else rng.randint(6, 12)
        reference = [_line(rng) for _ in range(n_lines)]
        if kind == "nonsense":
            reference = [NONSENSE] * n_lines

        track = SyntheticTrack(track_id, audio, True, language, reference, kind)
        asr["detect_language"][audio] = {"language": language, "probability": 0.97}
        spans: dict[str, str] = {}
        thank_you_after = rng.randrange(n_lines) if kind == "normal" else None
        for run in range(num_runs):
            t = rng.uniform(1.0, 5.0)
            segments = [_seg(0.0, 0.8, WATERMARK, 0.97)]
            for k, line in enumerate(reference):
                text = corrupt(line, rng, corruption) if kind != "nonsense" else line
                duration = 0.35 * len(text.split()) + 0.4
                if kind == "fast" and k == 1:
                    duration = 0.3
                nsp = 0.95 if kind == "silent" else round(rng.uniform(0.0, 0.5), 3)
                segments.append(_seg(t, t + duration, text, nsp))
                t += duration + 0.3
                if k == thank_you_after:
                    # an instrumental break the recognizer hears as "Thank you."
                    segments.append(_seg(t, t + 4.0, THANK_YOU, 0.3))
                    spans[f"{t:.3f}-{t + 4.0:.3f}"] = THANK_YOU
                    t += 4.3
            track.runs.append(_body(segments, language))
        asr["transcribe"][audio] = track.runs
        if spans:
            asr["spans"][audio] = spans

        if kind in ("nonsense", "corrected"):
            reply = _scripted_reply(track, num_runs, kind)
            if reply is not None:
                chat_responses[reply[0]] = reply[1]
        tracks.append(track)

    references = [" ".join(t.reference) for t in tracks if t.reference]
    chat = {"policy": "min_wer", "responses": chat_responses, "references": references}
    return SyntheticCorpus(tracks, asr, chat, tagger)


def _scripted_reply(track: SyntheticTrack, num_runs: int, kind: str):
    candidates = []
    for body in track.runs:
        lines = [s["text"].strip() for s in body["segments"] if s["no_speech_prob"] <= 0.9 and s["text"].strip()]
        if lines:
            candidates.append(lines)
    if len(candidates) < 2:
        return None
    pset = PredictionSet.from_lines(candidates, track.language)
    messages = build_messages(pset, PromptMode("dataset", track.language))
    digest = request_digest(messages, 0.0)
    if kind == "nonsense":
        return digest, EnsembleResponse("all predictions are nonsense", None, None).to_json()
    lines = list(candidates[0]) + ["completely invented closing line nobody sang here"]
    reply = EnsembleResponse("prediction_1 reads best; fixed the ending", "prediction_1", lines)
    return digest, "Here is the result:\n```json\n" + reply.to_json() + "\n```"


@dataclass
class BenchmarkFixture:
    items: list[dict]
    asr_script: dict
    references: list[str]

    def write(self, directory: str | Path) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"manifest": d / "benchmark.jsonl", "asr": d / "asr_script.json", "chat": d / "chat_script.json"}
        paths["manifest"].write_text("".join(json.dumps(x) + "\n" for x in self.items), encoding="utf-8")
        paths["asr"].write_text(json.dumps(self.asr_script, indent=1), encoding="utf-8")
        paths["chat"].write_text(
            json.dumps({"policy": "min_wer", "references": self.references}, indent=1), encoding="utf-8"
        )
        return paths


def benchmark_corpus(
    n_items: int = 12,
    seed: int = 0,
    *,
    num_runs: int = 3,
    corruption: float = 0.2,
    junk_lines: int = 2,
) -> BenchmarkFixture:
    """Song-level benchmark where runs carry independent word corruptions.

    Without a prompt, every run additionally contains *junk_lines* lines of
    non-lyric words (music descriptions), so prompted transcripts can never
    score worse than unprompted ones.
    """
    rng = random.Random(seed)
    items, script, refs = [], {"transcribe": {}}, []
    for i in range(n_items):
        audio = f"bench/song{i:02d}.wav"
        reference = [_line(rng) for _ in range(rng.randint(5, 9))]
        refs.append(" ".join(reference))
        runs, unprompted = [], []
        for _ in range(num_runs):
            t, segments = 0.0, []
            for line in reference:
                text = corrupt(line, rng, corruption)
                segments.append(_seg(t, t + 2.0, text))
                t += 2.5
            runs.append(_body(segments))
            junk = [_seg(t + 2.5 * k, t + 2.5 * k + 2.0, " ".join(rng.choices(JUNK, k=3))) for k in range(junk_lines)]
            unprompted.append(_body(segments + junk))
        script["transcribe"][audio] = {"runs": runs, "unprompted_runs": unprompted}
        items.append({"item_id": f"song{i:02d}", "audio": audio, "reference": "\n".join(reference), "language": "en"})
    return BenchmarkFixture(items, script, refs)


def gt_corpus(n_items: int = 20, seed: int = 0, *, n_candidates: int = 3, corruption: float = 0.25):
    """``(PredictionSet, ground truth lines)`` pairs; no candidate equals its ground truth."""
    rng = random.Random(seed)
    corpus = []
    for _ in range(n_items):
        truth = [_line(rng) for _ in range(rng.randint(4, 8))]
        candidates = []
        for _ in range(n_candidates):
            cand = [corrupt(line, rng, corruption) for line in truth]
            if cand == truth:
                k = rng.randrange(len(cand))
                cand[k] = corrupt(cand[k], rng, 1.0)
            candidates.append(cand)
        corpus.append((PredictionSet.from_lines(candidates), truth))
    return corpus
