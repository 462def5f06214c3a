"""Independent reference implementations used only by the tests.

They are written as plain recursion with memoization, deliberately unlike the
iterative dynamic programs in the package.
"""

from functools import lru_cache
from itertools import combinations


def edit_cost_oracle(a, b) -> int:
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        if a[i] == b[j]:
            return d(i + 1, j + 1)
        return 1 + min(d(i + 1, j), d(i, j + 1), d(i + 1, j + 1))

    return d(0, 0)


def monotonic_matchings(n_lines: int, n_segments: int):
    """Every strictly increasing partial matching of lines to segments."""
    for k in range(min(n_lines, n_segments) + 1):
        for lines in combinations(range(n_lines), k):
            for segs in combinations(range(n_segments), k):
                yield list(zip(lines, segs))


def best_matching(dist, n_lines, n_segments, threshold):
    """(matched count, total distance) of the best admissible matching.

    Most matches first, then the smallest summed distance. Distances are
    summed in line order so float totals compare exactly with the package.
    """
    best = (0, 0.0)
    for m in monotonic_matchings(n_lines, n_segments):
        ds = [dist[i][j] for i, j in m]
        if any(x > threshold for x in ds):
            continue
        total = 0.0
        for x in ds:
            total += x
        if (len(m), -total) > (best[0], -best[1]):
            best = (len(m), total)
    return best
