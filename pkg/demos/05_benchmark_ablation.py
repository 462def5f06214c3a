"""
Benchmark evaluation and ablations
==================================

The same pipeline in benchmark mode: no vocal gate, no validity judgment,
and scoring against reference lyrics. Turning the ensemble and the
recognizer prompt on and off shows what each contributes. The synthetic
benchmark gives every run independent word errors, and runs without a prompt
also transcribe some non-lyric noise.
"""

######################################################################
# Evaluation
# ----------

from lyricscribe import Backends, BenchmarkItem, MockAsrBackend, MockChatBackend, PipelineConfig
from lyricscribe.evalharness import ablation_matrix, render_language_table, render_table
from lyricscribe.synthetic import benchmark_corpus

bench = benchmark_corpus(12, seed=0)
items = [BenchmarkItem.from_dict(d) for d in bench.items]
backends = Backends(
    MockAsrBackend(bench.asr_script),
    MockChatBackend({"policy": "min_wer", "references": bench.references}),
)
reports = ablation_matrix(items, PipelineConfig(mode="benchmark"), backends)
print(render_table(reports))
print(render_language_table(reports[0]))

######################################################################
# Every report can be re-derived from its own per-item list.

print(all(r.is_self_consistent() for r in reports))

######################################################################
# Ground-truth selection
# ----------------------
#
# Slip the reference in among the candidates and count how often the judge
# picks it. An ideal judge always does; one that always answers
# ``prediction_1`` only does when the reference happens to land first.

from lyricscribe.ensemble import PromptMode, gt_selection_experiment
from lyricscribe.synthetic import gt_corpus

corpus = gt_corpus(200, seed=1)
ideal = MockChatBackend.with_policy("min_wer", references=[" ".join(t) for _, t in corpus])
lazy = MockChatBackend.with_policy("first")
print("ideal judge:", gt_selection_experiment(corpus, PromptMode(), ideal).rate)
print("always first:", gt_selection_experiment(corpus, PromptMode(), lazy).rate)
