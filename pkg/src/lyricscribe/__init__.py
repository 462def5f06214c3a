"""Multi-run lyrics transcription with chat-model ensembling."""

__version__ = "0.1.0"

from .align import AlignedLine, align_lines, char_rate, char_rate_ok, levenshtein, normalized_distance
from .asr import (
    AsrRequest,
    HttpAsrBackend,
    MockAsrBackend,
    TranscriptPrediction,
    TranscriptSegment,
    filter_segments,
    localized_prompt,
)
from .ensemble import (
    EnsembleOutcome,
    EnsembleResponse,
    EnsembleStatus,
    HttpChatBackend,
    MockChatBackend,
    PredictionSet,
    PromptMode,
    build_instruction_prompt,
    ensemble,
    gt_selection_experiment,
    parse_response,
    serialize_predictions,
)
from .errors import (
    BackendError,
    InputError,
    JournalError,
    ProtocolError,
    ResponseParseError,
    ResponseSchemaError,
    TransportError,
)
from .evalharness import BenchmarkItem, EvalReport, ablation_matrix, evaluate, read_benchmark_manifest
from .gate import GateConfig, HttpTaggerBackend, MockTaggerBackend, TagScores, is_vocal
from .metrics import CorpusWerReport, WerBreakdown, corpus_wer, word_error_rate
from .pipeline import (
    Backends,
    CorpusTrack,
    PipelineConfig,
    TrackStatus,
    build_dataset,
    read_corpus_manifest,
    transcribe_track,
)
from .textnorm import NormalizationRules, normalize_text

__all__ = [name for name in dir() if not name.startswith("_")]
