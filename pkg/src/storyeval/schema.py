"""Canonical annotated-record format: types, validation, streaming JSONL IO,
and the human-baseline truncation.

Wire format is line-delimited JSON, UTF-8, one record per line, with field
names: id, model, k, prompt, story, tokens, sent_bounds,
annos (objects with t, lemma, pos, ent), trace (object with sub_logp,
word_ix, vocab_size). Absent optional fields are omitted, never null.

Records lacking ``tokens`` or ``sent_bounds`` get them from the
deterministic textops fallbacks; word-level tokens are authoritative
everywhere downstream.

A record whose id ends in ``#prompt`` is a prompt sidecar: its story/tokens/
annos fields hold the *prompt* text of the base record, annotated. The eval
pipeline uses sidecars to supply prompt entity tags; they are ordinary valid
records at this layer.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from . import textops

UPOS_TAGS = frozenset(
    {
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
        "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    }
)

_ENT_RE = re.compile(r"^[BI]-[A-Z_]+$")

PROMPT_SIDECAR_SUFFIX = "#prompt"


class ValidationError(ValueError):
    """Record failed validation; carries the line number and offending field."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        at_line = f" (line {line})" if line is not None else ""
        where = f" [field: {field}]" if field else ""
        super().__init__(f"{message}{where}{at_line}")
        self.line = line
        self.field = field


@dataclass(frozen=True)
class AnnotatedToken:
    surface: str
    lemma: str
    pos: str
    ent: str = "O"


@dataclass(frozen=True)
class TokenTrace:
    """Per-subword natural-log probabilities aligned to word-level tokens."""

    sub_logp: tuple[float, ...]
    word_ix: tuple[int, ...]
    vocab_size: int


@dataclass(frozen=True)
class EvalRecord:
    """One (prompt, story) pair; tokens/sent_bounds/annotations/trace all
    describe the story side."""

    id: str
    model: str
    prompt_text: str
    story_text: str
    tokens: tuple[str, ...]
    sent_bounds: tuple[tuple[int, int], ...]
    k: int | None = None
    annotations: tuple[AnnotatedToken, ...] | None = None
    trace: TokenTrace | None = None

    def is_prompt_sidecar(self) -> bool:
        return self.id.endswith(PROMPT_SIDECAR_SUFFIX)

    def base_id(self) -> str:
        if self.is_prompt_sidecar():
            return self.id[: -len(PROMPT_SIDECAR_SUFFIX)]
        return self.id


def prompt_tokens(record: EvalRecord) -> list[str]:
    """Word tokens of the prompt, via the deterministic fallback tokenizer."""
    return textops.tokenize_words(record.prompt_text)


def prompt_sentences(record: EvalRecord) -> tuple[list[str], list[tuple[int, int]]]:
    toks = prompt_tokens(record)
    return toks, textops.split_sentences(toks)


def story_sentences(record: EvalRecord) -> list[list[str]]:
    return [list(record.tokens[a:b]) for a, b in record.sent_bounds]


# ---------------------------------------------------------------------------
# Validation


def _require(obj: dict, name: str, line: int | None):
    if name not in obj:
        raise ValidationError(f"missing required field '{name}'", line=line, field=name)
    return obj[name]


def _check_str(value, name: str, line: int | None) -> str:
    if not isinstance(value, str):
        raise ValidationError(f"field '{name}' must be a string", line=line, field=name)
    return value


def _check_int(value, name: str, line: int | None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"field '{name}' must be an integer", line=line, field=name)
    return value


def record_from_dict(obj: dict, *, line: int | None = None) -> EvalRecord:
    """Build a validated EvalRecord from a parsed wire-format object."""
    if not isinstance(obj, dict):
        raise ValidationError("record must be a JSON object", line=line)
    known = {"id", "model", "k", "prompt", "story", "tokens", "sent_bounds", "annos", "trace"}
    for key in obj:
        if key not in known:
            raise ValidationError(f"unknown field '{key}'", line=line, field=key)

    rid = _check_str(_require(obj, "id", line), "id", line)
    model = _check_str(_require(obj, "model", line), "model", line)
    prompt = _check_str(_require(obj, "prompt", line), "prompt", line)
    story = _check_str(_require(obj, "story", line), "story", line)

    if "tokens" in obj:
        raw_tokens = obj["tokens"]
        if not isinstance(raw_tokens, list) or not all(isinstance(t, str) for t in raw_tokens):
            raise ValidationError("field 'tokens' must be a list of strings", line=line, field="tokens")
        tokens = tuple(raw_tokens)
    else:
        tokens = tuple(textops.tokenize_words(story))

    if "sent_bounds" in obj:
        raw_bounds = obj["sent_bounds"]
        if not isinstance(raw_bounds, list):
            raise ValidationError("field 'sent_bounds' must be a list", line=line, field="sent_bounds")
        bounds = []
        for item in raw_bounds:
            if (
                not isinstance(item, (list, tuple))
                or len(item) != 2
                or any(isinstance(v, bool) or not isinstance(v, int) for v in item)
            ):
                raise ValidationError(
                    "sent_bounds entries must be [start, end] integer pairs",
                    line=line, field="sent_bounds",
                )
            bounds.append((item[0], item[1]))
        sent_bounds = tuple(bounds)
    else:
        sent_bounds = tuple(textops.split_sentences(list(tokens)))

    _check_sent_bounds(sent_bounds, len(tokens), line)

    k = None
    if "k" in obj:
        k = _check_int(obj["k"], "k", line)
        if k < 1:
            raise ValidationError("k must be a positive integer", line=line, field="k")

    annotations = None
    if "annos" in obj:
        annotations = _parse_annotations(obj["annos"], len(tokens), line)

    trace = None
    if "trace" in obj:
        trace = _parse_trace(obj["trace"], len(tokens), line)
        if k is not None and k > trace.vocab_size:
            raise ValidationError(
                f"k ({k}) exceeds trace vocab_size ({trace.vocab_size})",
                line=line, field="k",
            )

    return EvalRecord(
        id=rid, model=model, prompt_text=prompt, story_text=story,
        tokens=tokens, sent_bounds=sent_bounds, k=k,
        annotations=annotations, trace=trace,
    )


def _check_sent_bounds(bounds: tuple[tuple[int, int], ...], n_tokens: int, line: int | None):
    expected_start = 0
    for start, end in bounds:
        if start != expected_start or end <= start:
            raise ValidationError(
                "sentence bounds do not cover tokens",
                line=line, field="sent_bounds",
            )
        expected_start = end
    if expected_start != n_tokens:
        raise ValidationError(
            "sentence bounds do not cover tokens",
            line=line, field="sent_bounds",
        )


def _parse_annotations(raw, n_tokens: int, line: int | None) -> tuple[AnnotatedToken, ...]:
    if not isinstance(raw, list):
        raise ValidationError("field 'annos' must be a list", line=line, field="annos")
    if len(raw) != n_tokens:
        raise ValidationError(
            f"annotations length ({len(raw)}) != tokens length ({n_tokens})",
            line=line, field="annos",
        )
    annos = []
    for item in raw:
        if not isinstance(item, dict):
            raise ValidationError("annos entries must be objects", line=line, field="annos")
        surface = _check_str(_require(item, "t", line), "annos.t", line)
        lemma = _check_str(_require(item, "lemma", line), "annos.lemma", line)
        pos = _check_str(_require(item, "pos", line), "annos.pos", line)
        ent = _check_str(item.get("ent", "O"), "annos.ent", line)
        if pos not in UPOS_TAGS:
            raise ValidationError(f"pos tag '{pos}' not in the UPOS set", line=line, field="annos.pos")
        if ent != "O" and not _ENT_RE.match(ent):
            raise ValidationError(
                f"entity label '{ent}' must be 'O' or match [BI]-TYPE",
                line=line, field="annos.ent",
            )
        annos.append(AnnotatedToken(surface=surface, lemma=lemma, pos=pos, ent=ent))
    return tuple(annos)


def _parse_trace(raw, n_tokens: int, line: int | None) -> TokenTrace:
    if not isinstance(raw, dict):
        raise ValidationError("field 'trace' must be an object", line=line, field="trace")
    sub_logp = _require(raw, "sub_logp", line)
    word_ix = _require(raw, "word_ix", line)
    vocab_size = _check_int(_require(raw, "vocab_size", line), "trace.vocab_size", line)
    if not isinstance(sub_logp, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in sub_logp
    ):
        raise ValidationError("trace.sub_logp must be a list of numbers", line=line, field="trace.sub_logp")
    if not isinstance(word_ix, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in word_ix
    ):
        raise ValidationError("trace.word_ix must be a list of integers", line=line, field="trace.word_ix")
    if len(sub_logp) != len(word_ix):
        raise ValidationError(
            "trace.sub_logp and trace.word_ix must have the same length",
            line=line, field="trace",
        )
    if vocab_size < 1:
        raise ValidationError("trace.vocab_size must be positive", line=line, field="trace.vocab_size")
    for v in sub_logp:
        if v > 0:
            raise ValidationError("trace.sub_logp values must be <= 0", line=line, field="trace.sub_logp")
    prev = -1
    for w in word_ix:
        if w < prev:
            raise ValidationError("trace.word_ix must be nondecreasing", line=line, field="trace.word_ix")
        if not (0 <= w < n_tokens):
            raise ValidationError(
                f"trace.word_ix value {w} outside [0, {n_tokens})",
                line=line, field="trace.word_ix",
            )
        prev = w
    return TokenTrace(
        sub_logp=tuple(float(v) for v in sub_logp),
        word_ix=tuple(word_ix),
        vocab_size=vocab_size,
    )


# ---------------------------------------------------------------------------
# IO


def record_to_dict(record: EvalRecord) -> dict:
    """Wire-format object; absent optional fields omitted."""
    obj: dict = {
        "id": record.id,
        "model": record.model,
    }
    if record.k is not None:
        obj["k"] = record.k
    obj["prompt"] = record.prompt_text
    obj["story"] = record.story_text
    obj["tokens"] = list(record.tokens)
    obj["sent_bounds"] = [[a, b] for a, b in record.sent_bounds]
    if record.annotations is not None:
        obj["annos"] = [
            {"t": a.surface, "lemma": a.lemma, "pos": a.pos, "ent": a.ent}
            for a in record.annotations
        ]
    if record.trace is not None:
        obj["trace"] = {
            "sub_logp": list(record.trace.sub_logp),
            "word_ix": list(record.trace.word_ix),
            "vocab_size": record.trace.vocab_size,
        }
    return obj


def load_records(
    path,
    *,
    skip_invalid: bool = False,
    counts: dict | None = None,
) -> Iterator[EvalRecord]:
    """Stream validated records from a JSONL file, in file order.

    With ``skip_invalid``, records failing validation are counted under
    ``counts["skipped_invalid"]`` instead of aborting the run.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"malformed record: {exc.msg}", line=lineno) from exc
                record = record_from_dict(obj, line=lineno)
            except ValidationError:
                if skip_invalid:
                    if counts is not None:
                        counts["skipped_invalid"] = counts.get("skipped_invalid", 0) + 1
                    continue
                raise
            if counts is not None:
                counts["loaded"] = counts.get("loaded", 0) + 1
            yield record


def write_records(path, records: Iterable[EvalRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")
            n += 1
    return n


# ---------------------------------------------------------------------------
# Human baseline

BASELINE_LENGTH = 150


def truncate_record(record: EvalRecord, target_len: int = BASELINE_LENGTH) -> EvalRecord:
    """Cut a record to its first ``target_len`` word tokens.

    Sentence ranges are cut mid-sentence (a partial final sentence keeps its
    truncated range); annotations and trace are filtered consistently. The
    stored story text is rejoined from the kept tokens.
    """
    if len(record.tokens) <= target_len:
        return record
    tokens = record.tokens[:target_len]
    bounds = []
    for start, end in record.sent_bounds:
        if start >= target_len:
            break
        bounds.append((start, min(end, target_len)))
    annotations = record.annotations[:target_len] if record.annotations is not None else None
    trace = None
    if record.trace is not None:
        kept = [i for i, w in enumerate(record.trace.word_ix) if w < target_len]
        trace = TokenTrace(
            sub_logp=tuple(record.trace.sub_logp[i] for i in kept),
            word_ix=tuple(record.trace.word_ix[i] for i in kept),
            vocab_size=record.trace.vocab_size,
        )
    return EvalRecord(
        id=record.id, model=record.model, prompt_text=record.prompt_text,
        story_text=" ".join(tokens),
        tokens=tokens, sent_bounds=tuple(bounds), k=record.k,
        annotations=annotations, trace=trace,
    )


def build_human_baseline(
    records: Iterable[EvalRecord],
    *,
    target_len: int = BASELINE_LENGTH,
    counts: dict | None = None,
) -> Iterator[EvalRecord]:
    """Truncate human records to exactly ``target_len`` word tokens.

    Records shorter than the target and records whose model is not "human"
    are dropped; drop reasons are tallied into ``counts``.
    """

    def bump(key: str):
        if counts is not None:
            counts[key] = counts.get(key, 0) + 1

    for record in records:
        if record.model != "human":
            bump("dropped_nonhuman")
            continue
        if len(record.tokens) < target_len:
            bump("dropped_short")
            continue
        bump("kept")
        yield truncate_record(record, target_len)
