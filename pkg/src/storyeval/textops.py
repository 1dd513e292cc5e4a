"""Deterministic text primitives: fallback tokenization, fallback sentence
splitting, and n-gram extraction.

The tokenizer and splitter implement a fixed, fully specified rule so the
engine can run on raw text; curated corpora normally arrive pre-tokenized
with sentence bounds and these fallbacks never fire.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field

SENTENCE_TERMINATORS = {".", "!", "?"}

# Tokens absorbed into the preceding sentence when they directly follow a
# terminator (closing quotation marks, straight and typographic).
CLOSING_QUOTES = {'"', "'", "''", "”", "’"}


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize_words(text: str) -> list[str]:
    """Split on whitespace, then detach leading/trailing punctuation.

    Each detached punctuation character becomes its own token, in the order
    it appears; interior punctuation (hyphens, apostrophes) stays attached.
    """
    tokens: list[str] = []
    for chunk in text.split():
        left = 0
        right = len(chunk)
        while left < right and _is_punct(chunk[left]):
            left += 1
        while right > left and _is_punct(chunk[right - 1]):
            right -= 1
        tokens.extend(chunk[:left])
        if left < right:
            tokens.append(chunk[left:right])
        tokens.extend(chunk[right:])
    return tokens


def split_sentences(tokens: list[str]) -> list[tuple[int, int]]:
    """Half-open sentence ranges over ``tokens``.

    A sentence ends after a terminator token (``.``, ``!``, ``?``) plus any
    directly following closing quotes; trailing tokens with no terminator
    form a final sentence. The ranges partition [0, len(tokens)).
    """
    bounds: list[tuple[int, int]] = []
    start = 0
    i = 0
    n = len(tokens)
    while i < n:
        if tokens[i] in SENTENCE_TERMINATORS:
            end = i + 1
            while end < n and tokens[end] in CLOSING_QUOTES:
                end += 1
            bounds.append((start, end))
            start = end
            i = end
        else:
            i += 1
    if start < n:
        bounds.append((start, n))
    return bounds


@dataclass
class NgramSet:
    """All contiguous n-grams of one token sequence, with multiplicity."""

    n: int
    counts: Counter = field(default_factory=Counter)
    total: int = 0

    @property
    def unique(self) -> int:
        return len(self.counts)


def extract_ngrams(tokens: list[str], n: int) -> NgramSet:
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    counts: Counter = Counter()
    for i in range(len(tokens) - n + 1):
        counts[tuple(tokens[i : i + n])] += 1
    return NgramSet(n=n, counts=counts, total=max(0, len(tokens) - n + 1))
