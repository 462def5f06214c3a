"""Command-line entry point.

Subcommands: ``transcribe``, ``build-dataset``, ``evaluate``, ``ablate`` and
``gt-experiment``. Each backend is given either as an HTTP endpoint or as a
mock script file. The chat API key is read from the environment only.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .align import align_lines
from .asr import HttpAsrBackend, MockAsrBackend, filter_segments, localized_prompt, AsrRequest
from .ensemble import HttpChatBackend, MockChatBackend, PredictionSet, PromptMode, gt_selection_experiment
from .errors import BackendError, JournalError
from .evalharness import ablation_matrix, evaluate, read_benchmark_manifest, render_language_table, render_table
from .gate import GateConfig, HttpTaggerBackend, MockTaggerBackend
from .pipeline import Backends, PipelineConfig, build_dataset, read_corpus_manifest, transcribe_track
from .textnorm import NormalizationRules

logger = logging.getLogger("lyricscribe")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
CHAT_KEY_ENV = HttpChatBackend.API_KEY_ENV


class UsageError(Exception):
    pass


def _add_backend(parser, name: str, help_name: str):
    group = parser.add_mutually_exclusive_group()
    group.add_argument(f"--{name}-endpoint", metavar="URL", help=f"{help_name} service base URL")
    group.add_argument(f"--{name}-mock", metavar="SCRIPT", help=f"{help_name} mock script (JSON)")


def _common(parser, *, mode: str):
    parser.add_argument("--config", help="JSON file with default values for any option")
    _add_backend(parser, "asr", "speech recognition")
    _add_backend(parser, "chat", "chat completion")
    _add_backend(parser, "tagger", "audio tagging")
    parser.add_argument("--runs", type=int, default=3, help="transcription runs per track (3-5)")
    parser.add_argument("--no-speech-threshold", type=float, default=0.9)
    parser.add_argument("--align-threshold", type=float, default=0.2)
    parser.add_argument("--max-char-rate", type=float, default=37.5)
    parser.add_argument("--gate-threshold", type=float, default=0.07)
    parser.add_argument("--min-words", type=int, default=10)
    parser.add_argument("--max-words", type=int, default=2000)
    parser.add_argument("--mode", choices=("benchmark", "dataset"), default=mode)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--chat-rpm", type=float, default=None, help="chat requests per minute")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--log-level", default="WARNING")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lyricscribe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transcribe", help="transcribe one track or every track of a manifest")
    p.add_argument("audio", nargs="?", help="audio path or backend audio id")
    p.add_argument("--manifest", help="corpus manifest (JSONL) instead of a single track")
    p.add_argument("--language", help="skip language identification")
    _common(p, mode="benchmark")
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("build-dataset", help="build a timestamped lyrics dataset from a corpus")
    p.add_argument("manifest", help="corpus manifest (JSONL)")
    p.add_argument("--resume", action="store_true", help="skip tracks already in the journal")
    p.add_argument("--license", default="CC BY-NC-SA 4.0")
    _common(p, mode="dataset")
    p.set_defaults(func=cmd_build_dataset)

    for name, func, help_text in (
        ("evaluate", cmd_evaluate, "score a benchmark"),
        ("ablate", cmd_ablate, "score the ensemble x prompt ablation grid"),
        ("gt-experiment", cmd_gt_experiment, "rate at which the ensemble picks an inserted ground truth"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("benchmark", help="benchmark manifest (JSONL)")
        p.add_argument("--utterance-ensemble", action="store_true", help="ensemble utterance-level items too")
        _common(p, mode="benchmark")
        p.set_defaults(func=func)
    return parser


def _load_config_defaults(parser: argparse.ArgumentParser, argv: list[str]):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as f:
            defaults = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        parser.error(f"cannot read --config {known.config}: {e}")
    if not isinstance(defaults, dict):
        parser.error("--config must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in defaults.items()}
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            sub.set_defaults(**defaults)


def make_config(args) -> PipelineConfig:
    try:
        return PipelineConfig(
            num_runs=args.runs,
            no_speech_threshold=args.no_speech_threshold,
            align_threshold=args.align_threshold,
            max_char_rate=args.max_char_rate,
            gate=GateConfig(threshold=args.gate_threshold),
            min_total_words=args.min_words,
            max_total_words=args.max_words,
            mode=args.mode,
            worker_count=args.workers,
            license=getattr(args, "license", PipelineConfig.license),
        )
    except ValueError as e:
        raise UsageError(str(e)) from e


def check_backend_flags(args):
    """Every command needs speech recognition and chat; dataset mode also needs tagging."""
    if not (args.asr_endpoint or args.asr_mock):
        raise UsageError("give --asr-endpoint or --asr-mock")
    if not (args.chat_endpoint or args.chat_mock):
        raise UsageError("give --chat-endpoint or --chat-mock")
    if args.mode == "dataset" and not (args.tagger_endpoint or args.tagger_mock):
        raise UsageError("dataset mode needs --tagger-endpoint or --tagger-mock")


def make_backends(args, *, need_chat: bool, need_tagger: bool, references=None) -> Backends:
    if args.asr_endpoint:
        asr = HttpAsrBackend(args.asr_endpoint)
    elif args.asr_mock:
        asr = MockAsrBackend.from_file(args.asr_mock)
    else:
        raise UsageError("give --asr-endpoint or --asr-mock")

    chat = None
    if args.chat_endpoint:
        chat = HttpChatBackend(args.chat_endpoint, api_key=os.environ.get(CHAT_KEY_ENV), requests_per_minute=args.chat_rpm)
    elif args.chat_mock:
        chat = MockChatBackend.from_file(args.chat_mock)
        if references and not chat.references:
            chat.references = list(references)
    elif need_chat:
        raise UsageError("give --chat-endpoint or --chat-mock")

    tagger = None
    if args.tagger_endpoint:
        tagger = HttpTaggerBackend(args.tagger_endpoint)
    elif args.tagger_mock:
        tagger = MockTaggerBackend.from_file(args.tagger_mock)
    elif need_tagger:
        raise UsageError("dataset mode needs --tagger-endpoint or --tagger-mock")
    return Backends(asr, chat, tagger)


def _safe_name(track_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", track_id).strip("._") or "track"


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")


def cmd_transcribe(args) -> int:
    if bool(args.audio) == bool(args.manifest):
        raise UsageError("give exactly one of an audio path or --manifest")
    if args.manifest:
        tracks, _ = read_corpus_manifest(args.manifest)
        jobs = [(t.track_id, t.audio, t.language) for t in tracks]
    else:
        jobs = [(Path(args.audio).stem or args.audio, args.audio, args.language)]
    config = make_config(args)
    backends = make_backends(args, need_chat=True, need_tagger=config.is_dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    failures = 0
    for track_id, audio, language in jobs:
        result = transcribe_track(audio, config, backends, track_id=track_id, language=language)
        name = _safe_name(track_id)
        provenance = {
            "track_id": track_id,
            "audio": audio,
            "status": result.status.value,
            "reason": result.reason,
            "language": result.language,
            "num_runs": config.num_runs,
            "mode": config.mode,
            "run_line_counts": [len(p.lines()) for p in result.predictions],
            "closest_prediction": result.outcome.chosen_key if result.outcome else None,
            "ensemble_status": result.outcome.status.value if result.outcome else None,
            **{k: v for k, v in result.info.items() if k != "raw_end_s"},
        }
        if result.ok:
            source = result.source_prediction()
            rules = NormalizationRules.for_language(result.language)
            aligned, _ = align_lines(source.segments, result.lines, config.align_threshold, rules)
            provenance["timestamps"] = [line.to_dict() for line in aligned]
            (out / f"{name}.txt").write_text("\n".join(result.lines) + "\n", encoding="utf-8")
            print(out / f"{name}.txt")
        else:
            failures += 1
            print(f"{track_id}: no lyrics ({result.status.value}: {result.reason})", file=sys.stderr)
        _write_json(out / f"{name}.provenance.json", provenance)
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_build_dataset(args) -> int:
    config = make_config(args)
    backends = make_backends(args, need_chat=True, need_tagger=config.is_dataset)
    tracks, skipped = read_corpus_manifest(args.manifest)
    result = build_dataset(tracks, config, backends, args.out, resume=args.resume, skipped_manifest_lines=skipped)
    m = result.manifest
    print(f"{m['songs']} songs, {m['lines']} lines, {m['total_duration_s'] / 3600:.2f} h -> {result.dataset_path}")
    return EXIT_OK


def _benchmark_refs(items):
    return [item.reference for item in items]


def cmd_evaluate(args) -> int:
    items = read_benchmark_manifest(args.benchmark)
    config = make_config(args)
    backends = make_backends(args, need_chat=True, need_tagger=False, references=_benchmark_refs(items))
    report = evaluate(items, config, backends, utterance_ensemble=args.utterance_ensemble)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report.to_dict())
    table = render_table([report]) + "\n" + render_language_table(report)
    (out / "report.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def _slug(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", label.lower()).strip("_")


def cmd_ablate(args) -> int:
    items = read_benchmark_manifest(args.benchmark)
    config = make_config(args)
    backends = make_backends(args, need_chat=True, need_tagger=False, references=_benchmark_refs(items))
    reports = ablation_matrix(items, config, backends, utterance_ensemble=args.utterance_ensemble)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for report in reports:
        _write_json(out / f"ablation_{_slug(report.system)}.json", report.to_dict())
    table = render_table(reports)
    (out / "ablation.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_gt_experiment(args) -> int:
    items = read_benchmark_manifest(args.benchmark)
    config = replace(make_config(args), mode="benchmark")
    backends = make_backends(args, need_chat=True, need_tagger=False, references=_benchmark_refs(items))
    corpus = []
    for item in items:
        prompt = localized_prompt(item.language)
        candidates = []
        for run in range(config.num_runs):
            raw = backends.asr.transcribe(AsrRequest(item.audio_ref, prompt, item.language, run))
            lines = filter_segments(raw, config.no_speech_threshold).lines()
            if lines:
                candidates.append(lines)
        truth = [line.strip() for line in item.reference.splitlines() if line.strip()]
        if candidates and truth:
            corpus.append((PredictionSet.from_lines(candidates, item.language), truth))
        else:
            logger.warning("item %s has no usable candidates or reference, skipped", item.item_id)
    if not corpus:
        raise UsageError("no benchmark item yielded candidates")
    language = items[0].language if items else "en"
    result = gt_selection_experiment(corpus, PromptMode("benchmark", language), backends.chat, rng=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "gt_experiment.json", result.to_dict())
    print(f"ground truth selected in {result.selected}/{result.scored} items ({100 * result.rate:.1f}%)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _load_config_defaults(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=str(args.log_level).upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        check_backend_flags(args)
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"lyricscribe {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (JournalError, BackendError, OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
