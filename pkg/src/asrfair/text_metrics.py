"""Tokenization and word-level edit distance."""

from __future__ import annotations

import unicodedata
from collections import Counter
from fractions import Fraction

from .errors import BothEmpty


def _is_edge_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation/symbols from each end.

    Internal apostrophes and hyphens survive: ``"state-of-the-art."`` gives
    ``"state-of-the-art"``. No diacritic folding is done.
    """
    tokens = []
    for chunk in text.lower().split():
        start, end = 0, len(chunk)
        while start < end and _is_edge_punct(chunk[start]):
            start += 1
        while end > start and _is_edge_punct(chunk[end - 1]):
            end -= 1
        if start < end:
            tokens.append(chunk[start:end])
    return tokens


def word_levenshtein(a, b) -> int:
    """Unit-cost insert/delete/substitute distance between two token lists."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, wa in enumerate(a, 1):
        cur = [i]
        for j, wb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (wa != wb)))
        prev = cur
    return prev[-1]


def normalized_distance_exact(a, b) -> Fraction:
    longest = max(len(a), len(b))
    if longest == 0:
        raise BothEmpty("both transcripts are empty")
    return Fraction(word_levenshtein(a, b), longest)


def normalized_distance(a, b) -> float:
    """Edit distance divided by the length of the longer list, in [0, 1]."""
    return float(normalized_distance_exact(a, b))


def word_counts(tokens) -> Counter:
    return Counter(tokens)
