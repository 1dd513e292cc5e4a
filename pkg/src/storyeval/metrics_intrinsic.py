"""Single-text metrics: lexical diversity, unigram rarity, stopword share,
sentence length, POS distribution and POS diversity, concreteness.

Every function returns None ("absent") when its inputs cannot support the
statistic (empty text, missing annotations, no lexicon matches); callers
aggregate absent values by exclusion, never as zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import textops
from .resources import ConcretenessLexicon, Resources, StopwordList, UnigramTable
from .schema import UPOS_TAGS, EvalRecord


def _distinct(tokens: Sequence[str], n: int) -> float | None:
    grams = textops.extract_ngrams(list(tokens), n)
    if grams.total == 0:
        return None
    return grams.unique / grams.total


def distinct_n(record: EvalRecord, n: int) -> float | None:
    """Unique n-grams over total n-grams of the story tokens."""
    return _distinct(record.tokens, n)


def mean_log_unigram_prob(record: EvalRecord, unigrams: UnigramTable) -> float | None:
    """Mean natural-log unigram probability; OOV tokens take the table's
    floor probability so the mean is defined on any text."""
    if not record.tokens:
        return None
    total = 0.0
    for token in record.tokens:
        total += math.log(unigrams.prob(token))
    return total / len(record.tokens)


def stopword_fraction(record: EvalRecord, stopwords: StopwordList) -> float | None:
    if not record.tokens:
        return None
    hits = sum(1 for t in record.tokens if t.lower() in stopwords)
    return hits / len(record.tokens)


def mean_sentence_length(record: EvalRecord) -> float | None:
    if not record.sent_bounds:
        return None
    lengths = [end - start for start, end in record.sent_bounds]
    return sum(lengths) / len(lengths)


def pos_distribution(record: EvalRecord) -> dict[str, float] | None:
    """Normalized tag frequencies over the story's annotations."""
    if record.annotations is None or not record.annotations:
        return None
    counts: dict[str, int] = {}
    for anno in record.annotations:
        counts[anno.pos] = counts.get(anno.pos, 0) + 1
    total = len(record.annotations)
    return {tag: counts[tag] / total for tag in sorted(counts)}


def pos_distinct_n(record: EvalRecord, n: int) -> float | None:
    """distinct-n applied to the POS tag sequence exactly as to words."""
    if record.annotations is None:
        return None
    return _distinct([a.pos for a in record.annotations], n)


def mean_concreteness(
    record: EvalRecord,
    lexicon: ConcretenessLexicon,
    pos_class: str,
    *,
    include_propn: bool = False,
    include_aux: bool = False,
) -> float | None:
    """Mean 1-5 rating over the record's nouns or verbs, by lowercase lemma
    lookup. "Nouns" are UPOS NOUN (PROPN opt-in: the lexicon rates common
    lemmas, so proper nouns mostly fail lookup anyway); "verbs" are VERB
    with AUX opt-in. Tokens without a lexicon entry are excluded.
    """
    if pos_class not in ("NOUN", "VERB"):
        raise ValueError(f"pos_class must be NOUN or VERB, got {pos_class!r}")
    if record.annotations is None:
        return None
    wanted = {pos_class}
    if pos_class == "NOUN" and include_propn:
        wanted.add("PROPN")
    if pos_class == "VERB" and include_aux:
        wanted.add("AUX")
    ratings = []
    for anno in record.annotations:
        if anno.pos not in wanted:
            continue
        rating = lexicon.lookup(anno.lemma)
        if rating is not None:
            ratings.append(rating)
    if not ratings:
        return None
    return sum(ratings) / len(ratings)


@dataclass(frozen=True)
class IntrinsicMetrics:
    distinct_n: Mapping[int, float | None]
    mean_log_unigram: float | None
    stopword_frac: float | None
    mean_sent_len: float | None
    pos_dist: Mapping[str, float] | None
    pos_distinct_n: Mapping[int, float | None] | None
    noun_concreteness: float | None
    verb_concreteness: float | None

    def as_rows(self) -> dict[str, float | None]:
        """Flat metric-name → value map used by the aggregator."""
        rows: dict[str, float | None] = {}
        for n in (1, 2, 3):
            rows[f"distinct_{n}"] = self.distinct_n.get(n)
        rows["mean_log_unigram"] = self.mean_log_unigram
        rows["stopword_frac"] = self.stopword_frac
        rows["mean_sent_len"] = self.mean_sent_len
        for n in (1, 2, 3):
            rows[f"pos_distinct_{n}"] = (
                self.pos_distinct_n.get(n) if self.pos_distinct_n is not None else None
            )
        for tag in sorted(UPOS_TAGS):
            rows[f"pos_frac_{tag}"] = (
                self.pos_dist.get(tag, 0.0) if self.pos_dist is not None else None
            )
        rows["noun_concreteness"] = self.noun_concreteness
        rows["verb_concreteness"] = self.verb_concreteness
        return rows


def compute_intrinsic(
    record: EvalRecord,
    resources: Resources,
    *,
    include_propn: bool = False,
    include_aux: bool = False,
) -> IntrinsicMetrics:
    """All intrinsic metrics for one record; metrics whose resource is
    missing come out absent."""
    mlu = (
        mean_log_unigram_prob(record, resources.unigrams)
        if resources.unigrams is not None
        else None
    )
    stop = (
        stopword_fraction(record, resources.stopwords)
        if resources.stopwords is not None
        else None
    )
    noun_c = verb_c = None
    if resources.concreteness is not None and record.annotations is not None:
        noun_c = mean_concreteness(
            record, resources.concreteness, "NOUN", include_propn=include_propn
        )
        verb_c = mean_concreteness(
            record, resources.concreteness, "VERB", include_aux=include_aux
        )
    pos_d = pos_distribution(record)
    return IntrinsicMetrics(
        distinct_n={n: distinct_n(record, n) for n in (1, 2, 3)},
        mean_log_unigram=mlu,
        stopword_frac=stop,
        mean_sent_len=mean_sentence_length(record),
        pos_dist=pos_d,
        pos_distinct_n=(
            {n: pos_distinct_n(record, n) for n in (1, 2, 3)}
            if record.annotations is not None
            else None
        ),
        noun_concreteness=noun_c,
        verb_concreteness=verb_c,
    )
