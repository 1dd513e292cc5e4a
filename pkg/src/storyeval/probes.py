"""Model probes: prompt ranking, adjacent-sentence swap detection,
per-position confidence curves, and word-level perplexity.

Probes run either live against an LmScorer or from stored score files, so
neural scoring can happen offline. Stored scores are JSONL objects
{"key": ..., "logp": ...} with keys "<record_id>#orig",
"<record_id>#swap<i>" (i = 1..14) and "<record_id>#prompt<j>"
(j = 1..distractors).
"""

from __future__ import annotations

import hashlib
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import textops
from .rng import SplitMix64, derive_seed
from .schema import EvalRecord, TokenTrace, story_sentences

SWAP_SENTENCES = 15
SWAP_COUNT = SWAP_SENTENCES - 1
RANKING_DISTRACTORS = 9
CONFIDENCE_HORIZON = 150


class LmScorer(ABC):
    """Fixed-vocabulary sequence scorer.

    score_sequence returns the total natural-log probability of target given
    context (0 for an empty target); next_dist returns a probability vector
    over the vocabulary summing to 1 within 1e-9. Calls must be pure given
    (context, target) so probes can fan out across workers.
    """

    @property
    @abstractmethod
    def vocab(self) -> tuple[str, ...]:
        ...

    @abstractmethod
    def next_dist(self, context: Sequence[str]) -> np.ndarray:
        ...

    @abstractmethod
    def score_sequence(self, context: Sequence[str], target: Sequence[str]) -> float:
        ...

    @property
    def reserved_ids(self) -> frozenset[int]:
        """Token ids generation must never emit (sentinels and the like)."""
        return frozenset()

    def token_id(self, token: str) -> int | None:
        index = getattr(self, "_token_index", None)
        if index is None:
            index = {t: i for i, t in enumerate(self.vocab)}
            self._token_index = index
        return index.get(token)

    def encode_token(self, token: str) -> int | None:
        """Id a target token scores under; scorers with an unknown-word
        class map OOV here instead of returning None."""
        return self.token_id(token)


class RandomBaselineScorer(LmScorer):
    """Chance baseline: scores are uniform in (-1, 0), derived purely from a
    keyed hash of (context, target) so repeated calls agree."""

    def __init__(self, seed: int = 0, vocab: Sequence[str] = ("a", "b")):
        self._seed = seed & ((1 << 64) - 1)
        self._vocab = tuple(vocab)

    @property
    def vocab(self) -> tuple[str, ...]:
        return self._vocab

    def next_dist(self, context: Sequence[str]) -> np.ndarray:
        n = len(self._vocab)
        return np.full(n, 1.0 / n)

    def score_sequence(self, context: Sequence[str], target: Sequence[str]) -> float:
        if not target:
            return 0.0
        h = hashlib.blake2b(key=self._seed.to_bytes(8, "little"), digest_size=8)
        h.update("\x1f".join(context).encode("utf-8"))
        h.update(b"\x1e")
        h.update("\x1f".join(target).encode("utf-8"))
        u = (int.from_bytes(h.digest(), "little") >> 11) * 2.0 ** -53
        return u - 1.0


@dataclass(frozen=True)
class ProbeResult:
    prompt_ranking_acc: float | None = None
    swap_error_rate: float | None = None
    swap_mean_rank: Mapping[int, float] | None = None
    confidence_curve: Mapping[int, float] | None = None
    story_logprob_mean: float | None = None
    counts: Mapping[str, int] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Prompt ranking


def _prompt_pool(prompts: Iterable[str]) -> list[str]:
    seen = set()
    pool = []
    for p in prompts:
        if p not in seen:
            seen.add(p)
            pool.append(p)
    return pool


def _sample_distractors(pool: list[str], exclude: str, count: int, rng: SplitMix64) -> list[str]:
    candidates = [p for p in pool if p != exclude]
    if len(candidates) < count:
        raise ValueError(
            f"need at least {count + 1} distinct prompts, have {len(candidates) + 1}"
        )
    # partial Fisher-Yates: draws exactly `count` without replacement
    picked = []
    last = len(candidates) - 1
    for _ in range(count):
        j = rng.next_below(last + 1)
        candidates[j], candidates[last] = candidates[last], candidates[j]
        picked.append(candidates[last])
        last -= 1
    return picked


def _won(true_score: float, others: Sequence[float], tie_policy: str) -> bool:
    best = max(others)
    if tie_policy == "lenient":
        return true_score >= best
    return true_score > best


def prompt_ranking_accuracy(
    scorer: LmScorer,
    stories: Sequence[EvalRecord],
    prompts: Iterable[str],
    distractors: int = RANKING_DISTRACTORS,
    seed: int = 0,
    tie_policy: str = "strict",
) -> float:
    """Fraction of stories scored strictly higher under their true prompt
    than under `distractors` seeded-random distinct distractor prompts.

    Distractors are drawn without replacement from the distinct prompts of
    the evaluation set, excluding the story's own; each story uses seed
    global_seed XOR story index, so reruns reproduce the exact draw. Ties
    count as failures ("lenient" counts them as wins instead).
    """
    pool = _prompt_pool(prompts)
    if len(pool) < distractors + 1:
        raise ValueError(
            f"prompt ranking needs at least {distractors + 1} distinct prompts, got {len(pool)}"
        )
    if not stories:
        raise ValueError("prompt ranking needs at least one story")
    wins = 0
    for index, record in enumerate(stories):
        rng = SplitMix64(derive_seed(seed, index))
        sampled = _sample_distractors(pool, record.prompt_text, distractors, rng)
        target = list(record.tokens)
        true_score = scorer.score_sequence(textops.tokenize_words(record.prompt_text), target)
        other = [
            scorer.score_sequence(textops.tokenize_words(p), target) for p in sampled
        ]
        if _won(true_score, other, tie_policy):
            wins += 1
    return wins / len(stories)


def prompt_ranking_from_scores(
    scores: Mapping[str, float],
    record_ids: Sequence[str],
    distractors: int = RANKING_DISTRACTORS,
    tie_policy: str = "strict",
) -> float:
    if not record_ids:
        raise ValueError("prompt ranking needs at least one story")
    wins = 0
    for rid in record_ids:
        true_score = scores[orig_key(rid)]
        other = [scores[prompt_key(rid, j)] for j in range(1, distractors + 1)]
        if _won(true_score, other, tie_policy):
            wins += 1
    return wins / len(record_ids)


# ---------------------------------------------------------------------------
# Swap probe


def swap_candidates(record: EvalRecord) -> list[list[str]] | None:
    """Original plus 14 corrupted token sequences over the first 15
    sentences; corruption i swaps adjacent sentences i and i+1 (1-indexed).
    None when the record has fewer than 15 sentences.
    """
    sentences = story_sentences(record)
    if len(sentences) < SWAP_SENTENCES:
        return None
    sentences = sentences[:SWAP_SENTENCES]
    original = [t for sent in sentences for t in sent]
    out = [original]
    for i in range(SWAP_COUNT):
        swapped = list(sentences)
        swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
        out.append([t for sent in swapped for t in sent])
    return out


def _swap_tally(
    original: float, corrupted: Sequence[float]
) -> tuple[bool, list[int]]:
    """Error flag and per-position ranks for one record's candidate scores.

    A tie with the original counts as an error: a scorer that cannot tell
    the corruption apart has not detected it. Rank 1 is the most probable
    corruption; score ties rank by swap position.
    """
    error = max(corrupted) >= original
    order = sorted(range(len(corrupted)), key=lambda i: (-corrupted[i], i))
    ranks = [0] * len(corrupted)
    for rank, i in enumerate(order, start=1):
        ranks[i] = rank
    return error, ranks


@dataclass(frozen=True)
class SwapResult:
    error_rate: float
    mean_rank: Mapping[int, float]
    scored: int
    skipped: int


def swap_probe(scorer: LmScorer, records: Iterable[EvalRecord]) -> SwapResult:
    """Score all 15 candidates of each record conditioned on its prompt;
    error iff any corrupted candidate scores >= the original."""
    errors = 0
    scored = 0
    skipped = 0
    rank_sums = [0.0] * SWAP_COUNT
    for record in records:
        candidates = swap_candidates(record)
        if candidates is None:
            skipped += 1
            continue
        context = textops.tokenize_words(record.prompt_text)
        values = [scorer.score_sequence(context, cand) for cand in candidates]
        error, ranks = _swap_tally(values[0], values[1:])
        errors += error
        for pos in range(SWAP_COUNT):
            rank_sums[pos] += ranks[pos]
        scored += 1
    if scored == 0:
        raise ValueError("swap probe: no record had 15 sentences")
    return SwapResult(
        error_rate=errors / scored,
        mean_rank={pos + 1: rank_sums[pos] / scored for pos in range(SWAP_COUNT)},
        scored=scored,
        skipped=skipped,
    )


def swap_probe_from_scores(
    scores: Mapping[str, float], record_ids: Sequence[str]
) -> SwapResult:
    errors = 0
    scored = 0
    skipped = 0
    rank_sums = [0.0] * SWAP_COUNT
    for rid in record_ids:
        key = orig_key(rid)
        if key not in scores:
            skipped += 1
            continue
        original = scores[key]
        corrupted = [scores[swap_key(rid, i)] for i in range(1, SWAP_COUNT + 1)]
        error, ranks = _swap_tally(original, corrupted)
        errors += error
        for pos in range(SWAP_COUNT):
            rank_sums[pos] += ranks[pos]
        scored += 1
    if scored == 0:
        raise ValueError("swap probe: no scored records")
    return SwapResult(
        error_rate=errors / scored,
        mean_rank={pos + 1: rank_sums[pos] / scored for pos in range(SWAP_COUNT)},
        scored=scored,
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Traces: confidence, log probability, perplexity


def word_logprobs(trace: TokenTrace) -> dict[int, float]:
    """Total log probability per word index (subword log-probs summed)."""
    totals: dict[int, float] = {}
    for logp, w in zip(trace.sub_logp, trace.word_ix):
        totals[w] = totals.get(w, 0.0) + logp
    return totals


def confidence_curve(
    traces: Iterable[TokenTrace], horizon: int = CONFIDENCE_HORIZON
) -> tuple[dict[int, float], int, int]:
    """Mean probability of each of the first `horizon` word positions.

    Positions are 1-indexed in the result. Traces not covering every word
    position below the horizon are excluded (and counted); zero qualifying
    traces is an error.
    """
    sums = [0.0] * horizon
    used = 0
    excluded = 0
    for trace in traces:
        words = word_logprobs(trace)
        if any(t not in words for t in range(horizon)):
            excluded += 1
            continue
        for t in range(horizon):
            sums[t] += math.exp(words[t])
        used += 1
    if used == 0:
        raise ValueError(f"confidence curve: no trace covers {horizon} word tokens")
    return {t + 1: sums[t] / used for t in range(horizon)}, used, excluded


def story_logprob(trace: TokenTrace) -> float:
    """Total log probability of the story: sum of all subword log-probs."""
    if not trace.sub_logp:
        raise ValueError("story_logprob of an empty trace")
    return sum(trace.sub_logp)


def word_perplexity(traces: Iterable[TokenTrace]) -> float:
    """exp(total NLL / word-token count) over the corpus; the word count is
    the number of distinct word indices, so subword segmentation does not
    move the value."""
    total_logp = 0.0
    total_words = 0
    for trace in traces:
        if not trace.sub_logp:
            raise ValueError("word_perplexity over an empty trace")
        total_logp += sum(trace.sub_logp)
        total_words += len(set(trace.word_ix))
    if total_words == 0:
        raise ValueError("word_perplexity over zero traces")
    return math.exp(-total_logp / total_words)


# ---------------------------------------------------------------------------
# Stored-score files


def orig_key(record_id: str) -> str:
    return f"{record_id}#orig"


def swap_key(record_id: str, i: int) -> str:
    return f"{record_id}#swap{i}"


def prompt_key(record_id: str, j: int) -> str:
    return f"{record_id}#prompt{j}"


def load_scores(path) -> dict[str, float]:
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            obj = json.loads(raw)
            if "key" not in obj or "logp" not in obj:
                raise ValueError(f"{path}: line {lineno}: expected keys 'key' and 'logp'")
            scores[obj["key"]] = float(obj["logp"])
    return scores


def save_scores(scores: Mapping[str, float], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(scores):
            fh.write(json.dumps({"key": key, "logp": scores[key]}) + "\n")


def teacher_forced_trace(
    scorer: LmScorer, context: Sequence[str], target: Sequence[str]
) -> TokenTrace:
    """One-subword-per-word trace of target under the scorer, conditioned on
    context; feeds the confidence and perplexity probes without generation."""
    sub_logp = []
    word_ix = []
    running = list(context)
    for i, token in enumerate(target):
        dist = scorer.next_dist(running)
        tid = scorer.encode_token(token)
        p = float(dist[tid]) if tid is not None else 0.0
        sub_logp.append(math.log(p) if p > 0.0 else -math.inf)
        word_ix.append(i)
        running.append(token)
    return TokenTrace(
        sub_logp=tuple(sub_logp), word_ix=tuple(word_ix), vocab_size=len(scorer.vocab)
    )
