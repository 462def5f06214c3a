"""
Building a timestamped lyrics dataset
=====================================

A full dataset build on a synthetic corpus served by mock backends. The
corpus mixes instrumental tracks, watermark segments, nonsense songs,
fabricated corrections, lines sung too fast and "Thank you." hallucinations,
so every filter has something to do.
"""

######################################################################
# The corpus
# ----------

import json
import tempfile
from collections import Counter
from pathlib import Path

from lyricscribe import Backends, CorpusTrack, MockAsrBackend, MockChatBackend, MockTaggerBackend, PipelineConfig, build_dataset
from lyricscribe.synthetic import dataset_corpus

corpus = dataset_corpus(50, seed=0)
print(Counter(t.kind if t.vocal else "instrumental" for t in corpus.tracks))

backends = Backends(
    asr=MockAsrBackend(corpus.asr_script),
    chat=MockChatBackend(corpus.chat_script),
    tagger=MockTaggerBackend(corpus.tagger_script),
)
tracks = [CorpusTrack(t.track_id, t.audio) for t in corpus.tracks]

######################################################################
# Build
# -----
#
# Four workers; the output does not depend on the worker count.

out = Path(tempfile.mkdtemp())
result = build_dataset(tracks, PipelineConfig(worker_count=4), backends, out)
manifest = result.manifest

for name, stage in {**manifest["track_stages"], **manifest["line_stages"]}.items():
    print(f"{name:24} in={stage['in']:4} out={stage['out']:4} dropped={stage['dropped']}")
print(f"{manifest['songs']} songs, {manifest['lines']} lines")

######################################################################
# One entry of ``dataset.jsonl``:

entry = json.loads(result.dataset_path.read_text().splitlines()[0])
print(json.dumps({**entry, "lines": entry["lines"][:2]}, indent=2))

######################################################################
# Gated tracks never reach the recognizer, and tracks with no speech left
# never reach the chat model.

print("chat requests:", len(backends.chat.calls), "for", sum(t.vocal for t in corpus.tracks), "vocal tracks")

######################################################################
# Resuming
# --------
#
# The journal in the output directory records finished tracks. Running
# again with ``resume=True`` reuses them and produces the same bytes.

again = build_dataset(tracks, PipelineConfig(), backends, out, resume=True)
print("identical after resume:", again.dataset_path.read_bytes() == result.dataset_path.read_bytes())
