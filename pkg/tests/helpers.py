"""Deterministic fixture builders shared by the test modules."""

from __future__ import annotations

import random

from storyeval import textops
from storyeval.schema import AnnotatedToken, EvalRecord, TokenTrace

WORDS = (
    "river stone lantern window harbor sailor garden shadow letter bridge "
    "wolf bell tower winter dream crow night bread salt fire map road dust "
    "queen king ship storm candle mirror bone song"
).split()

POS_CHOICES = ("NOUN", "VERB", "ADJ", "ADV", "DET", "ADP", "PRON", "PROPN", "AUX")


def make_tokens(rnd: random.Random, n_sentences: int, sent_len: int = 8) -> list[str]:
    tokens = []
    for _ in range(n_sentences):
        count = max(2, sent_len + rnd.randint(-2, 2))
        tokens.extend(rnd.choice(WORDS) for _ in range(count - 1))
        tokens.append(rnd.choice(".!?"))
    return tokens


def make_annotations(rnd: random.Random, tokens: list[str]) -> tuple[AnnotatedToken, ...]:
    annos = []
    i = 0
    while i < len(tokens):
        t = tokens[i]
        if t in ".!?":
            annos.append(AnnotatedToken(surface=t, lemma=t, pos="PUNCT"))
            i += 1
        elif rnd.random() < 0.08 and i + 1 < len(tokens) and tokens[i + 1] not in ".!?":
            annos.append(AnnotatedToken(surface=t, lemma=t.lower(), pos="PROPN", ent="B-LOC"))
            annos.append(
                AnnotatedToken(
                    surface=tokens[i + 1], lemma=tokens[i + 1].lower(),
                    pos="PROPN", ent="I-LOC",
                )
            )
            i += 2
        else:
            annos.append(
                AnnotatedToken(surface=t, lemma=t.lower(), pos=rnd.choice(POS_CHOICES))
            )
            i += 1
    return tuple(annos)


def make_trace(rnd: random.Random, n_words: int) -> TokenTrace:
    sub_logp = []
    word_ix = []
    for w in range(n_words):
        for _ in range(rnd.randint(1, 3)):
            sub_logp.append(-rnd.uniform(0.05, 4.0))
            word_ix.append(w)
    return TokenTrace(sub_logp=tuple(sub_logp), word_ix=tuple(word_ix), vocab_size=5000)


def make_record(
    seed: int,
    n_sentences: int = 4,
    model: str = "toy",
    k: int | None = 5,
    with_annos: bool = True,
    with_trace: bool = True,
    prompt: str | None = None,
) -> EvalRecord:
    rnd = random.Random(seed)
    tokens = make_tokens(rnd, n_sentences)
    if prompt is None:
        prompt = " ".join(rnd.choice(WORDS) for _ in range(6)) + " ."
    return EvalRecord(
        id=f"rec-{seed}",
        model=model,
        k=k,
        prompt_text=prompt,
        story_text=" ".join(tokens),
        tokens=tuple(tokens),
        sent_bounds=tuple(textops.split_sentences(tokens)),
        annotations=make_annotations(rnd, tokens) if with_annos else None,
        trace=make_trace(rnd, len(tokens)) if with_trace else None,
    )


def make_swap_record(i: int, prompt_pool_size: int = 20) -> EvalRecord:
    """15 pairwise-distinct sentences, so every corruption is distinct."""
    tokens = []
    for s in range(15):
        rnd = random.Random(i * 100 + s)
        tokens.extend([f"s{s}"] + [rnd.choice(WORDS) for _ in range(6)] + ["."])
    return EvalRecord(
        id=f"swap-{i}",
        model="toy",
        k=None,
        prompt_text=f"prompt number {i % prompt_pool_size} .",
        story_text=" ".join(tokens),
        tokens=tuple(tokens),
        sent_bounds=tuple(textops.split_sentences(tokens)),
    )
