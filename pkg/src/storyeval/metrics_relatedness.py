"""Prompt-relatedness metrics: n-gram overlap, weighted-average sentence
embeddings with first-principal-component removal, story-prompt sentence
similarity, and entity usage.

The principal component is a batch-level quantity. The pipeline embeds every
prompt and story sentence in the configured scope, computes the component
once, and hands it back in as ``component`` for per-record similarity; these
functions never compute a PC from a single record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import textops
from .resources import EmbeddingTable, UnigramTable
from .schema import AnnotatedToken, EvalRecord, prompt_tokens, story_sentences

_ZERO_EPS = 1e-12


@dataclass(frozen=True)
class SifConfig:
    """Weighting and PC-removal settings for sentence embeddings.

    pc_scope names the batch over which the component is computed:
    "model-k" (all sentences of the current model/k group) or "corpus"
    (every sentence in the run). Reported in output metadata since the
    choice moves the similarity values.
    """

    a: float = 1e-3
    pc_removal: bool = True
    pc_scope: str = "model-k"


def ngram_overlap(record: EvalRecord, n: int) -> float | None:
    """Fraction of story n-gram occurrences (with multiplicity) whose
    n-gram occurs anywhere in the prompt."""
    story = textops.extract_ngrams(list(record.tokens), n)
    if story.total == 0:
        return None
    prompt_grams = textops.extract_ngrams(prompt_tokens(record), n)
    prompt_set = set(prompt_grams.counts)
    hits = sum(count for gram, count in story.counts.items() if gram in prompt_set)
    return hits / story.total


def sif_embed(
    sentence: Sequence[str],
    embeddings: EmbeddingTable,
    unigrams: UnigramTable,
    cfg: SifConfig,
) -> np.ndarray | None:
    """v = (1/m) sum a/(a+p(w)) * v_w over the m embeddable tokens.

    Tokens without an embedding are skipped; a sentence with none is absent.
    PC removal is applied batch-wise by the caller, not here.
    """
    acc = None
    m = 0
    for token in sentence:
        vec = embeddings.lookup(token)
        if vec is None:
            continue
        weight = cfg.a / (cfg.a + unigrams.prob(token))
        acc = weight * vec if acc is None else acc + weight * vec
        m += 1
    if m == 0:
        return None
    return acc / m


def first_principal_component(batch: np.ndarray) -> np.ndarray:
    """First right singular vector of the stacked (n, d) batch."""
    if batch.ndim != 2 or batch.shape[0] < 2:
        raise ValueError("PC removal needs a batch of at least 2 vectors")
    _, _, vt = np.linalg.svd(batch, full_matrices=False)
    return vt[0]


def remove_component(vectors: np.ndarray, component: np.ndarray) -> np.ndarray:
    """v <- v - u u^T v, rowwise."""
    proj = vectors @ component
    return vectors - np.outer(proj, component)


def remove_first_pc(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project the batch's first principal component out of every vector.

    Returns the residual batch and a mask flagging zero residuals (a batch
    of identical vectors collapses entirely onto its component).
    """
    component = first_principal_component(batch)
    out = remove_component(batch, component)
    zero_mask = np.linalg.norm(out, axis=1) <= _ZERO_EPS
    return out, zero_mask


def _cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= _ZERO_EPS or nb <= _ZERO_EPS:
        return None
    return float(np.dot(a, b) / (na * nb))


def _sentence_vectors(
    sentences: list[list[str]],
    embeddings: EmbeddingTable,
    unigrams: UnigramTable,
    cfg: SifConfig,
    component: np.ndarray | None,
) -> list[np.ndarray]:
    vectors = []
    for sent in sentences:
        v = sif_embed(sent, embeddings, unigrams, cfg)
        if v is None:
            continue
        if component is not None:
            v = v - component * float(np.dot(v, component))
            if float(np.linalg.norm(v)) <= _ZERO_EPS:
                continue
        vectors.append(v)
    return vectors


def prompt_sentence_tokens(record: EvalRecord) -> list[list[str]]:
    toks = prompt_tokens(record)
    return [toks[a:b] for a, b in textops.split_sentences(toks)]


def story_prompt_similarity(
    record: EvalRecord,
    embeddings: EmbeddingTable,
    unigrams: UnigramTable,
    cfg: SifConfig,
    component: np.ndarray | None = None,
) -> float | None:
    """Mean cosine over all (prompt sentence, story sentence) pairs.

    Sentences with no embeddable token, and zero-residual vectors after PC
    removal, are skipped; no valid pairs means absent.
    """
    prompt_vecs = _sentence_vectors(
        prompt_sentence_tokens(record), embeddings, unigrams, cfg, component
    )
    story_vecs = _sentence_vectors(
        story_sentences(record), embeddings, unigrams, cfg, component
    )
    sims = []
    for pv in prompt_vecs:
        for sv in story_vecs:
            c = _cosine(pv, sv)
            if c is not None:
                sims.append(c)
    if not sims:
        return None
    return sum(sims) / len(sims)


# ---------------------------------------------------------------------------
# Entities


def entity_spans(annotations: Sequence[AnnotatedToken]) -> list[str]:
    """Normalized entity span texts from IOB tags, in order of appearance.

    A stray I- tag (no preceding B- of any type) opens a span; normalization
    is single-space joining plus lowercasing.
    """
    spans: list[str] = []
    current: list[str] = []
    for anno in annotations:
        tag = anno.ent
        if tag == "O":
            if current:
                spans.append(" ".join(current).lower())
                current = []
        elif tag.startswith("B-"):
            if current:
                spans.append(" ".join(current).lower())
            current = [anno.surface]
        else:  # I-
            current.append(anno.surface)
    if current:
        spans.append(" ".join(current).lower())
    return spans


def entity_usage(
    record: EvalRecord,
    prompt_annotations: Sequence[AnnotatedToken] | None = None,
) -> tuple[float | None, int | None]:
    """(fraction of distinct prompt entities appearing in the story,
    count of distinct story entity texts).

    "Appears" means the normalized entity text occurs as a substring of the
    normalized story text; stories inflect mentions, so span equality would
    undercount. Prompt entities come from a prompt-sidecar record's
    annotations; without them the rate is absent.
    """
    if record.annotations is None:
        return None, None
    story_entities = set(entity_spans(record.annotations))
    unique = len(story_entities)
    if prompt_annotations is None:
        return None, unique
    prompt_entities = set(entity_spans(prompt_annotations))
    if not prompt_entities:
        return None, unique
    story_text = " ".join(record.tokens).lower()
    hits = sum(1 for ent in prompt_entities if ent in story_text)
    return hits / len(prompt_entities), unique


# ---------------------------------------------------------------------------
# Bundle


@dataclass(frozen=True)
class RelatednessMetrics:
    ngram_overlap: Mapping[int, float | None]
    sent_similarity: float | None
    entity_usage_rate: float | None
    unique_entities: int | None

    def as_rows(self) -> dict[str, float | None]:
        rows: dict[str, float | None] = {}
        for n in (1, 2, 3):
            rows[f"ngram_overlap_{n}"] = self.ngram_overlap.get(n)
        rows["sent_similarity"] = self.sent_similarity
        rows["entity_usage_rate"] = self.entity_usage_rate
        rows["unique_entities"] = (
            float(self.unique_entities) if self.unique_entities is not None else None
        )
        return rows


def compute_relatedness(
    record: EvalRecord,
    embeddings: EmbeddingTable | None,
    unigrams: UnigramTable | None,
    cfg: SifConfig,
    component: np.ndarray | None = None,
    prompt_annotations: Sequence[AnnotatedToken] | None = None,
) -> RelatednessMetrics:
    sim = None
    if embeddings is not None and unigrams is not None:
        sim = story_prompt_similarity(record, embeddings, unigrams, cfg, component)
    rate, unique = entity_usage(record, prompt_annotations)
    return RelatednessMetrics(
        ngram_overlap={n: ngram_overlap(record, n) for n in (1, 2, 3)},
        sent_similarity=sim,
        entity_usage_rate=rate,
        unique_entities=unique,
    )
