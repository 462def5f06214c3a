"""
Putting timestamps back on corrected lyrics
===========================================

After ensembling, the chosen lyrics are plain text lines; the timestamps
live on the recognizer's segments. Each final line is matched to a segment
with an order-preserving alignment on normalized text. Lines that do not
resemble any segment closely enough are dropped, and lines sung impossibly
fast are filtered out afterwards.
"""

######################################################################
# A recognizer output and a set of final lines
# --------------------------------------------

from lyricscribe.align import align_lines, char_rate, char_rate_ok, normalized_distance
from lyricscribe.asr import TranscriptSegment

segments = [
    TranscriptSegment(0.0, 1.0, "Subtitles by the community", 0.97),
    TranscriptSegment(1.5, 4.0, "hello darknes my old friend"),
    TranscriptSegment(4.5, 8.5, "Thank you."),
    TranscriptSegment(9.0, 11.0, "I've come to talk with you again"),
    TranscriptSegment(11.2, 11.4, "because a vision softly creeping"),
]
final = [
    "Hello darkness, my old friend",
    "I've come to talk with you again",
    "Because a vision softly creeping",
    "A line nobody sang",
]

######################################################################
# Alignment
# ---------
#
# The distance is the character edit distance divided by the longer
# string's length. Pairs above 0.2 can never be matched.

print(normalized_distance("hello darkness my old friend", "hello darknes my old friend"))

aligned, dropped = align_lines(segments, final, threshold=0.2)
for line in aligned:
    print(f"[{line.start_s:5.2f} - {line.end_s:5.2f}] seg {line.source_segment_index}  d={line.distance:.3f}  {line.text}")
print("dropped:", dropped)

######################################################################
# Character rate
# --------------
#
# The third line landed on a 0.2 second segment. At over 150 characters per
# second it cannot be a real alignment, so the rate filter removes it.

for line in aligned:
    print(f"{char_rate(line):7.1f} chars/s  keep={char_rate_ok(line)}  {line.text}")
