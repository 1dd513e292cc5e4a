"""Read-only lexicons behind the metrics: word embeddings, a unigram
probability table, a concreteness rating lexicon, and a stopword list.

File formats:
  embeddings     "word v1 v2 ... vd" per line, space-separated
  unigram table  "word probability" per line, header line "#total N"
  concreteness   two-column CSV "lemma,rating" with a header row
  stopwords      one word per line

All tables are immutable after load and safe to share across workers.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

ENV_RESOURCE_DIR = "STORYEVAL_RESOURCES"

EMBEDDINGS_FILENAME = "embeddings.txt"
UNIGRAM_FILENAME = "unigram.txt"
CONCRETENESS_FILENAME = "concreteness.csv"
STOPWORDS_FILENAME = "stopwords.txt"


class ResourceError(ValueError):
    """A resource file failed to load."""


class EmptyResourceError(ResourceError):
    pass


class DimensionMismatchError(ResourceError):
    pass


class RatingRangeError(ResourceError):
    pass


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    entries: Mapping[str, np.ndarray]

    def lookup(self, word: str) -> np.ndarray | None:
        """Exact match first, then lowercase; None when absent (never a
        silent zero vector)."""
        vec = self.entries.get(word)
        if vec is None:
            vec = self.entries.get(word.lower())
        return vec

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class UnigramTable:
    probs: Mapping[str, float]
    total_tokens: int
    floor_prob: float

    def prob(self, word: str) -> float:
        return self.probs.get(word, self.floor_prob)


@dataclass(frozen=True)
class ConcretenessLexicon:
    ratings: Mapping[str, float]

    def lookup(self, lemma: str) -> float | None:
        return self.ratings.get(lemma.lower())

    def __len__(self) -> int:
        return len(self.ratings)


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)


def build_unigram_table(corpus: Iterable[str], floor_prob: float | None = None) -> UnigramTable:
    """Relative-frequency unigram table; unseen words get 1/(N+1) unless an
    explicit floor is supplied."""
    counts: dict[str, int] = {}
    total = 0
    for token in corpus:
        counts[token] = counts.get(token, 0) + 1
        total += 1
    if total == 0:
        raise EmptyResourceError("cannot build a unigram table from an empty corpus")
    probs = {w: c / total for w, c in counts.items()}
    if floor_prob is None:
        floor_prob = 1.0 / (total + 1)
    if floor_prob <= 0:
        raise ResourceError("floor probability must be positive")
    return UnigramTable(probs=probs, total_tokens=total, floor_prob=floor_prob)


def load_embeddings(path) -> EmbeddingTable:
    entries: dict[str, np.ndarray] = {}
    dimension = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) < 2:
                raise ResourceError(f"{path}: line {lineno}: expected 'word v1 ... vd'")
            word = parts[0]
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise ResourceError(f"{path}: line {lineno}: non-numeric vector component") from exc
            if dimension is None:
                dimension = vec.shape[0]
            elif vec.shape[0] != dimension:
                raise DimensionMismatchError(
                    f"{path}: line {lineno}: vector of dimension {vec.shape[0]}, expected {dimension}"
                )
            vec.flags.writeable = False
            entries[word] = vec
    if not entries:
        raise EmptyResourceError(f"{path}: empty embedding file")
    return EmbeddingTable(dimension=dimension, entries=entries)


def load_unigram_table(path) -> UnigramTable:
    probs: dict[str, float] = {}
    total = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#total"):
                total = int(line.split()[1])
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise ResourceError(f"{path}: line {lineno}: expected 'word probability'")
            probs[parts[0]] = float(parts[1])
    if not probs:
        raise EmptyResourceError(f"{path}: empty unigram table")
    if total is None:
        raise ResourceError(f"{path}: missing '#total N' header")
    return UnigramTable(probs=probs, total_tokens=total, floor_prob=1.0 / (total + 1))


def save_unigram_table(table: UnigramTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#total {table.total_tokens}\n")
        for word in sorted(table.probs):
            fh.write(f"{word} {table.probs[word]!r}\n")


def load_concreteness(path) -> ConcretenessLexicon:
    ratings: dict[str, float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyResourceError(f"{path}: empty concreteness file")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ResourceError(f"{path}: expected two columns, got {len(row)}: {row!r}")
            lemma, raw_rating = row
            rating = float(raw_rating)
            if not (1.0 <= rating <= 5.0):
                raise RatingRangeError(f"{path}: rating {rating} for '{lemma}' outside [1, 5]")
            ratings[lemma.lower()] = rating
    if not ratings:
        raise EmptyResourceError(f"{path}: no concreteness rows")
    return ConcretenessLexicon(ratings=ratings)


def load_stopwords(path) -> StopwordList:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            word = raw.strip()
            if word:
                words.add(word.lower())
    if not words:
        raise EmptyResourceError(f"{path}: empty stopword list")
    return StopwordList(words=frozenset(words))


# ---------------------------------------------------------------------------
# Resource bundles


@dataclass(frozen=True)
class Resources:
    """All four tables plus content hashes for run fingerprinting."""

    embeddings: EmbeddingTable | None
    unigrams: UnigramTable | None
    concreteness: ConcretenessLexicon | None
    stopwords: StopwordList | None
    hashes: Mapping[str, str] = field(default_factory=dict)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def bundled_data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


def resolve_resource_dir(explicit: str | os.PathLike | None = None) -> Path:
    """Explicit path, else the STORYEVAL_RESOURCES environment variable,
    else the bundled data directory."""
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(ENV_RESOURCE_DIR)
    if env:
        return Path(env)
    return bundled_data_dir()


def load_resources(directory: str | os.PathLike | None = None) -> Resources:
    """Load whichever of the four standard files exist in the directory.

    Missing files yield None tables (dependent metrics come out absent);
    present-but-malformed files still raise.
    """
    root = resolve_resource_dir(directory)
    if not root.is_dir():
        raise ResourceError(f"resource directory not found: {root}")

    loaders = {
        "embeddings": (EMBEDDINGS_FILENAME, load_embeddings),
        "unigrams": (UNIGRAM_FILENAME, load_unigram_table),
        "concreteness": (CONCRETENESS_FILENAME, load_concreteness),
        "stopwords": (STOPWORDS_FILENAME, load_stopwords),
    }
    loaded: dict = {}
    hashes: dict[str, str] = {}
    for name, (filename, loader) in loaders.items():
        path = root / filename
        if path.is_file():
            loaded[name] = loader(path)
            hashes[name] = _sha256(path)
        else:
            loaded[name] = None
    return Resources(hashes=hashes, **loaded)
