"""Top-k sampling over any LmScorer, and the trainable reference n-gram LM
that lets generation and probes run end to end without a neural model.

Sampling order inside one step: banned ids are zeroed first (a banned token
never occupies a top-k slot), temperature rescales the remaining logits,
the distribution is truncated to the k most probable ids with ties at the
k-th value broken toward lower ids, renormalized, and sampled with the
record's own SplitMix64 stream. k equal to the vocabulary size is full
sampling; k = 1 is greedy.

The n-gram model smooths with interpolated absolute discounting (discount
0.75) down through the unigram level, which is itself interpolated with the
uniform distribution over the full vocabulary, so every conditional
probability is strictly positive.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import textops
from .probes import LmScorer
from .rng import SplitMix64
from .schema import TokenTrace

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
_BOS_ID, _EOS_ID, _UNK_ID = 0, 1, 2

DEFAULT_ORDER = 3
DEFAULT_DISCOUNT = 0.75
_SUM_TOL = 1e-9

_MAGIC = b"STEVNGM1"


@dataclass(frozen=True)
class SamplerConfig:
    k: int
    temperature: float = 1.0
    banned: frozenset[int] = field(default_factory=frozenset)
    target_len: int = 150
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.target_len < 1:
            raise ValueError("target_len must be positive")
        object.__setattr__(self, "banned", frozenset(self.banned))


def truncate_distribution(
    dist: np.ndarray, cfg: SamplerConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Ban, rescale, truncate, renormalize; returns (ids ascending, probs).

    The ids are the surviving top-k token ids in ascending id order with
    their renormalized probabilities, which is also the fixed order the
    categorical draw walks, so sampling is reproducible bit for bit.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 1:
        raise ValueError("distribution must be a 1-d probability vector")
    if abs(float(dist.sum()) - 1.0) > _SUM_TOL:
        raise ValueError("distribution does not sum to 1")
    if np.any(dist < 0):
        raise ValueError("distribution has negative entries")
    if cfg.k > dist.shape[0]:
        raise ValueError(f"k ({cfg.k}) exceeds vocabulary size ({dist.shape[0]})")

    work = dist.copy()
    if cfg.banned:
        banned = [b for b in cfg.banned if 0 <= b < work.shape[0]]
        work[banned] = 0.0
    total = float(work.sum())
    if total <= 0.0:
        raise ValueError("all probability mass is banned")

    if cfg.temperature != 1.0:
        with np.errstate(divide="ignore"):
            logits = np.log(work)
        logits /= cfg.temperature
        m = logits.max()
        work = np.exp(logits - m)
        work /= work.sum()
    else:
        work = work / total

    order = np.argsort(-work, kind="stable")  # ties at the cut fall to lower ids
    selected = np.sort(order[: cfg.k])
    probs = work[selected]
    probs = probs / probs.sum()
    return selected, probs


def _draw(ids: np.ndarray, probs: np.ndarray, rng: SplitMix64) -> int:
    u = rng.next_float()
    cum = 0.0
    for i in range(ids.shape[0]):
        cum += probs[i]
        if u < cum:
            return i
    return ids.shape[0] - 1


def top_k_step(dist: np.ndarray, cfg: SamplerConfig, rng: SplitMix64) -> int:
    """One truncated-renormalized categorical draw; returns the token id."""
    ids, probs = truncate_distribution(dist, cfg)
    return int(ids[_draw(ids, probs, rng)])


def generate(
    scorer: LmScorer, prompt_tokens: Sequence[str], cfg: SamplerConfig
) -> tuple[list[str], TokenTrace]:
    """Sample exactly cfg.target_len word tokens conditioned on the prompt.

    The scorer's reserved ids (sentinels, unknown-word class) are banned on
    top of cfg.banned, so sampling runs straight past end-of-text. The trace
    logs each choice's probability under the truncated-renormalized
    distribution it was drawn from, one subword per word.
    """
    banned = frozenset(cfg.banned) | scorer.reserved_ids
    step_cfg = SamplerConfig(
        k=cfg.k, temperature=cfg.temperature, banned=banned,
        target_len=cfg.target_len, seed=cfg.seed,
    )
    rng = SplitMix64(cfg.seed)
    vocab = scorer.vocab
    context = list(prompt_tokens)
    out: list[str] = []
    sub_logp: list[float] = []
    word_ix: list[int] = []
    for t in range(cfg.target_len):
        dist = scorer.next_dist(context)
        ids, probs = truncate_distribution(dist, step_cfg)
        j = _draw(ids, probs, rng)
        token = vocab[int(ids[j])]
        out.append(token)
        context.append(token)
        sub_logp.append(math.log(float(probs[j])))
        word_ix.append(t)
    trace = TokenTrace(
        sub_logp=tuple(sub_logp), word_ix=tuple(word_ix), vocab_size=len(vocab)
    )
    return out, trace


# ---------------------------------------------------------------------------
# Reference n-gram LM

# count tables: _tables[o-1] maps history id-tuple (length o-1) to
# {continuation id: count}; unigram history is ().


class NgramModel(LmScorer):
    """Immutable interpolated absolute-discounting n-gram LM.

    Vocabulary ids: 0 begin-sentinel, 1 end-sentinel, 2 unknown, then the
    corpus types in sorted order. The sentinel/unknown ids are reserved for
    generation. OOV tokens score as the unknown class.
    """

    def __init__(
        self,
        order: int,
        discount: float,
        vocab: tuple[str, ...],
        tables: list[dict[tuple[int, ...], dict[int, int]]],
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not 0.0 < discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        self._order = order
        self._discount = discount
        self._vocab = vocab
        self._tables = tables
        self._totals = [
            {h: sum(conts.values()) for h, conts in level.items()} for level in tables
        ]
        self._p1 = self._build_unigram_dist()

    def _build_unigram_dist(self) -> np.ndarray:
        v = len(self._vocab)
        counts = self._tables[0][()]
        total = self._totals[0][()]
        lam = self._discount * len(counts) / total
        p1 = np.full(v, lam / v, dtype=np.float64)
        for w, c in counts.items():
            p1[w] += (c - self._discount) / total
        return p1

    @property
    def order(self) -> int:
        return self._order

    @property
    def discount(self) -> float:
        return self._discount

    @property
    def vocab(self) -> tuple[str, ...]:
        return self._vocab

    @property
    def reserved_ids(self) -> frozenset[int]:
        return frozenset({_BOS_ID, _EOS_ID, _UNK_ID})

    def encode_token(self, token: str) -> int:
        tid = self.token_id(token)
        return _UNK_ID if tid is None else tid

    def _context_ids(self, context: Sequence[str]) -> list[int]:
        ids = [_BOS_ID] * (self._order - 1)
        ids.extend(self.encode_token(t) for t in context)
        return ids

    def next_dist(self, context: Sequence[str]) -> np.ndarray:
        ids = self._context_ids(context)
        p = self._p1.copy()
        for o in range(2, self._order + 1):
            h = tuple(ids[len(ids) - (o - 1):])
            conts = self._tables[o - 1].get(h)
            if conts is None:
                continue
            total = self._totals[o - 1][h]
            lam = self._discount * len(conts) / total
            p *= lam
            for w, c in conts.items():
                p[w] += (c - self._discount) / total
        return p

    def _cond_prob(self, ids: Sequence[int], target: int) -> float:
        p = float(self._p1[target])
        for o in range(2, self._order + 1):
            h = tuple(ids[len(ids) - (o - 1):])
            conts = self._tables[o - 1].get(h)
            if conts is None:
                continue
            total = self._totals[o - 1][h]
            lam = self._discount * len(conts) / total
            c = conts.get(target, 0)
            p = max(c - self._discount, 0.0) / total + lam * p
        return p

    def score_sequence(self, context: Sequence[str], target: Sequence[str]) -> float:
        if not target:
            return 0.0
        ids = self._context_ids(context)
        total = 0.0
        for token in target:
            tid = self.encode_token(token)
            total += math.log(self._cond_prob(ids, tid))
            ids.append(tid)
        return total


def train_ngram(
    corpus: Iterable[str],
    order: int = DEFAULT_ORDER,
    discount: float = DEFAULT_DISCOUNT,
) -> NgramModel:
    """Count-and-smooth an n-gram model from a word-token stream.

    The corpus is split into sentences (terminator rule of the fallback
    splitter); each sentence is padded with order-1 begin sentinels and one
    end sentinel. Counts at every level come from the same prediction
    positions, so each level's histories are consistent with the next.
    """
    tokens = list(corpus)
    if not tokens:
        raise ValueError("cannot train on an empty corpus")
    types = sorted(set(tokens) - {BOS, EOS, UNK})
    vocab = (BOS, EOS, UNK) + tuple(types)
    index = {t: i for i, t in enumerate(vocab)}

    tables: list[dict[tuple[int, ...], dict[int, int]]] = [dict() for _ in range(order)]
    pad = [_BOS_ID] * (order - 1)
    for start, end in textops.split_sentences(tokens):
        ids = pad + [index[t] for t in tokens[start:end]] + [_EOS_ID]
        for j in range(order - 1, len(ids)):
            target = ids[j]
            for o in range(1, order + 1):
                h = tuple(ids[j - (o - 1): j])
                conts = tables[o - 1].setdefault(h, {})
                conts[target] = conts.get(target, 0) + 1
    return NgramModel(order=order, discount=discount, vocab=vocab, tables=tables)


# ---------------------------------------------------------------------------
# Persistence: sorted binary table with a versioned header


def save_ngram(model: NgramModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Id", model.order, model.discount))
        fh.write(struct.pack("<I", len(model.vocab)))
        for token in model.vocab:
            raw = token.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        for o in range(1, model.order + 1):
            level = model._tables[o - 1]
            fh.write(struct.pack("<I", len(level)))
            for h in sorted(level):
                fh.write(struct.pack(f"<{o - 1}I", *h) if o > 1 else b"")
                conts = level[h]
                fh.write(struct.pack("<I", len(conts)))
                for w in sorted(conts):
                    fh.write(struct.pack("<IQ", w, conts[w]))


def _read_body(fh) -> NgramModel:
    order, discount = struct.unpack("<Id", fh.read(12))
    (vocab_len,) = struct.unpack("<I", fh.read(4))
    vocab = []
    for _ in range(vocab_len):
        (n,) = struct.unpack("<I", fh.read(4))
        vocab.append(fh.read(n).decode("utf-8"))
    tables: list[dict[tuple[int, ...], dict[int, int]]] = []
    for o in range(1, order + 1):
        (n_hist,) = struct.unpack("<I", fh.read(4))
        level: dict[tuple[int, ...], dict[int, int]] = {}
        for _ in range(n_hist):
            if o > 1:
                h = struct.unpack(f"<{o - 1}I", fh.read(4 * (o - 1)))
            else:
                h = ()
            (n_cont,) = struct.unpack("<I", fh.read(4))
            conts = {}
            for _ in range(n_cont):
                w, c = struct.unpack("<IQ", fh.read(12))
                conts[w] = c
            level[h] = conts
        tables.append(level)
    return NgramModel(order=order, discount=discount, vocab=tuple(vocab), tables=tables)


def load_ngram(path) -> NgramModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an n-gram model file (bad header)")
        try:
            return _read_body(fh)
        except struct.error as exc:
            raise ValueError(f"{path}: truncated or corrupt model file") from exc
