"""
Normalizing lyrics and scoring transcripts
==========================================

Reference lyrics and machine transcripts disagree in many ways that have
nothing to do with recognition quality: capitalization, punctuation, emoji,
digits written as numbers. Everything is normalized the same way before any
word error rate is computed.
"""

######################################################################
# Normalization
# -------------

from lyricscribe import NormalizationRules, normalize_text

for text in ["Hello, WORLD! 2 😀", "Don't stop me now!!", "Back in the 80s", "DÉJÀ VU ♪"]:
    print(f"{text!r:28} -> {normalize_text(text)!r}")

######################################################################
# Numbers are only spelled out for English. Other languages keep their
# digits, and diacritics are never removed.

print(normalize_text("J'ai 20 ans, à Paris.", NormalizationRules("fr")))
print(normalize_text("Мне 20 лет!", NormalizationRules("ru")))

######################################################################
# Word error rate
# ---------------
#
# ``word_error_rate`` reports the edit breakdown of one alignment. The
# corpus helper normalizes both sides with per-language rules and reports
# both the mean over songs and the pooled rate over all words.

from lyricscribe.metrics import corpus_wer, tokenize, word_error_rate

b = word_error_rate(tokenize("the cat sat on the mat"), tokenize("the cat sit on mat today"))
print(b)
print(f"WER = {b.wer:.3f}")

report = corpus_wer(
    [
        ("song-a", "en", "I got 99 problems", "i got ninety nine problems"),
        ("song-b", "en", "Hold me closer, tiny dancer", "hold me closer tony danza"),
        ("song-c", "fr", "Non, je ne regrette rien", "non je ne regrette rien"),
    ]
)
print("mean", report.mean_wer, "pooled", report.pooled_wer)
print("per language", report.per_language)
