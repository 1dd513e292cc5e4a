"""Turn raw (prompt, story) text into fully annotated engine records.

Two backends produce tokens, sentence bounds, and per-token
POS/lemma/entity annotations:

- "spacy": a spaCy pipeline, the usual source for real experiments.
  Loading is deferred and failures surface as BridgeError.
- "rule": a dependency-free fallback with a regex tokenizer, a closed-class
  lexicon plus suffix heuristics for POS, a crude lemmatizer, and
  capitalized-run NER. Tagging quality is deliberately naive; its point is
  deterministic, schema-clean output on machines without spaCy.

Both backends rewrite the stored text as the space-join of their tokens,
so text and tokens never disagree downstream. Each annotated story is
paired with a "<id>#prompt" sidecar record carrying the annotated prompt,
which is how prompt entities reach the engine.
"""

from __future__ import annotations

import re
from typing import Iterable, Iterator

from . import BridgeError
from .records import build_record, sidecar_id

Annotation = dict  # {"t", "lemma", "pos", "ent"}

_WORD_RE = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)*|[0-9]+(?:\.[0-9]+)?|[^\sA-Za-z0-9]")
_TERMINALS = {".", "!", "?"}

# closed classes; everything else falls through to suffix rules
_LEXICON: dict[str, str] = {}
for _pos, _words in (
    ("DET", "the a an this that these those each every some any no another"),
    ("ADP", "of in on at by with from for to into onto over under about above"
            " after before between through during against around among across"),
    ("PRON", "i you he she it we they me him her us them my your his its our"
             " their mine yours hers ours theirs myself yourself himself"
             " herself itself ourselves themselves who whom whose which what"
             " something nothing anything everything someone anyone everyone"),
    ("AUX", "is are was were be been being am do does did has have had will"
            " would can could may might must shall should"),
    ("CCONJ", "and or but nor yet"),
    ("SCONJ", "if because while although though since unless until when where"
              " whether as"),
    ("PART", "not n't to"),
    ("ADV", "very never always often sometimes here there now then just only"
            " quite too also still again soon almost"),
    ("INTJ", "oh ah hey wow yes no"),
    ("NUM", "one two three four five six seven eight nine ten zero"),
):
    for _w in _words.split():
        _LEXICON.setdefault(_w, _pos)

_ADJ_SUFFIXES = ("ous", "ful", "ive", "less", "able", "ible", "al", "ic")


class RuleAnnotator:
    """Deterministic annotator with documented, intentionally simple rules."""

    name = "rule"

    def annotate_text(self, text: str) -> tuple[list[str], list[list[int]], list[Annotation]]:
        tokens = _WORD_RE.findall(text)
        bounds = _sentence_bounds(tokens)
        sentence_starts = {a for a, _ in bounds}
        annos = []
        for i, tok in enumerate(tokens):
            pos = _rule_pos(tok, sentence_initial=i in sentence_starts)
            annos.append({"t": tok, "lemma": _rule_lemma(tok, pos), "pos": pos, "ent": "O"})
        _mark_entities(annos)
        return tokens, bounds, annos


def _sentence_bounds(tokens: list[str]) -> list[list[int]]:
    bounds = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok in _TERMINALS:
            bounds.append([start, i + 1])
            start = i + 1
    if start < len(tokens):
        bounds.append([start, len(tokens)])
    return bounds


def _rule_pos(tok: str, *, sentence_initial: bool) -> str:
    if not any(c.isalnum() for c in tok):
        return "PUNCT"
    if tok[0].isdigit():
        return "NUM"
    low = tok.lower()
    if low in _LEXICON:
        return _LEXICON[low]
    if tok[0].isupper() and not sentence_initial:
        return "PROPN"
    if low.endswith("ly") and len(low) > 3:
        return "ADV"
    if (low.endswith("ing") or low.endswith("ed")) and len(low) > 4:
        return "VERB"
    if low.endswith(_ADJ_SUFFIXES) and len(low) > 4:
        return "ADJ"
    return "NOUN"


def _rule_lemma(tok: str, pos: str) -> str:
    if pos in ("PUNCT", "NUM", "PROPN"):
        return tok if pos == "PUNCT" else tok.lower()
    low = tok.lower()
    if pos == "VERB":
        if low.endswith("ying") and len(low) > 5:
            return low[:-4] + "y"
        if low.endswith("ing") and len(low) > 5:
            return low[:-3]
        if low.endswith("ied") and len(low) > 4:
            return low[:-3] + "y"
        if low.endswith("ed") and len(low) > 4:
            return low[:-2]
    if pos == "NOUN" and low.endswith("s") and not low.endswith("ss") and len(low) > 3:
        return low[:-1]
    return low


def _mark_entities(annos: list[Annotation]) -> None:
    # maximal runs of PROPN become one entity span
    prev_propn = False
    for anno in annos:
        if anno["pos"] == "PROPN":
            anno["ent"] = "I-MISC" if prev_propn else "B-MISC"
            prev_propn = True
        else:
            prev_propn = False


class SpacyAnnotator:
    def __init__(self, pipeline: str = "en_core_web_sm"):
        try:
            import spacy
        except ImportError as exc:
            raise BridgeError(
                "spaCy backend requested but spacy is not installed; "
                "use --backend rule or install the spacy extra"
            ) from exc
        try:
            self._nlp = spacy.load(pipeline)
        except OSError as exc:
            raise BridgeError(f"could not load spaCy pipeline '{pipeline}': {exc}") from exc
        self.name = f"spacy:{pipeline}"

    def annotate_text(self, text: str) -> tuple[list[str], list[list[int]], list[Annotation]]:
        doc = self._nlp(text)
        tokens: list[str] = []
        bounds: list[list[int]] = []
        annos: list[Annotation] = []
        for sent in doc.sents:
            start = len(tokens)
            for tok in sent:
                if tok.is_space:
                    continue
                ent = "O"
                if tok.ent_iob_ in ("B", "I") and tok.ent_type_:
                    ent = f"{tok.ent_iob_}-{tok.ent_type_}"
                tokens.append(tok.text)
                annos.append(
                    {"t": tok.text, "lemma": tok.lemma_, "pos": tok.pos_, "ent": ent}
                )
            if len(tokens) > start:
                bounds.append([start, len(tokens)])
        return tokens, bounds, annos


def make_annotator(backend: str, pipeline: str = "en_core_web_sm"):
    if backend == "rule":
        return RuleAnnotator()
    if backend == "spacy":
        return SpacyAnnotator(pipeline)
    raise BridgeError(f"unknown annotation backend '{backend}'")


def annotate_records(
    inputs: Iterable[dict],
    annotator,
    *,
    default_model: str = "human",
    prompt_sidecars: bool = True,
) -> Iterator[dict]:
    """Annotate raw text records into canonical engine records.

    Inputs need "prompt" and "story" strings; "id", "model", and "k" pass
    through when present, with generated ids and the default model name
    filling the gaps.
    """
    for i, obj in enumerate(inputs):
        if "prompt" not in obj or "story" not in obj:
            raise BridgeError(f"input record {i} lacks prompt/story text")
        rid = str(obj.get("id", f"{default_model}-{i:05d}"))
        model = str(obj.get("model", default_model))
        k = obj.get("k")

        tokens, bounds, annos = annotator.annotate_text(str(obj["story"]))
        story = " ".join(tokens)
        p_tokens, p_bounds, p_annos = annotator.annotate_text(str(obj["prompt"]))
        prompt = " ".join(p_tokens)

        yield build_record(
            rid, model, prompt, story,
            k=k, tokens=tokens, sent_bounds=bounds, annos=annos,
        )
        if prompt_sidecars and p_tokens:
            yield build_record(
                sidecar_id(rid), model, "", prompt,
                tokens=p_tokens, sent_bounds=p_bounds, annos=p_annos,
            )
