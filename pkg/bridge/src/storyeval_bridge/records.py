"""Engine wire formats, written from this side of the fence.

A record is one JSON object per line with fields id, model, k, prompt,
story, tokens, sent_bounds, annos, trace; optional fields are omitted when
absent, never null. A score file is one {"key", "logp"} object per line
with keys "<id>#orig", "<id>#swap<i>" (i = 1..14), "<id>#prompt<j>".
A record whose id ends in "#prompt" is a prompt sidecar: its story-side
fields carry the annotated prompt text of the base record.

The engine validates everything it loads; helpers here only enforce the
shapes the bridge itself relies on.
"""

from __future__ import annotations

import json
from typing import Iterable, Iterator, Mapping

PROMPT_SIDECAR_SUFFIX = "#prompt"


def build_record(
    rid: str,
    model: str,
    prompt: str,
    story: str,
    *,
    k: int | None = None,
    tokens: list[str] | None = None,
    sent_bounds: list[list[int]] | None = None,
    annos: list[dict] | None = None,
    trace: dict | None = None,
) -> dict:
    """Assemble a wire-format record object, omitting absent optionals."""
    obj: dict = {"id": rid, "model": model}
    if k is not None:
        obj["k"] = k
    obj["prompt"] = prompt
    obj["story"] = story
    if tokens is not None:
        obj["tokens"] = list(tokens)
    if sent_bounds is not None:
        obj["sent_bounds"] = [[a, b] for a, b in sent_bounds]
    if annos is not None:
        obj["annos"] = annos
    if trace is not None:
        obj["trace"] = trace
    return obj


def build_trace(sub_logp: list[float], word_ix: list[int], vocab_size: int) -> dict:
    if len(sub_logp) != len(word_ix):
        raise ValueError("sub_logp and word_ix must have the same length")
    return {
        "sub_logp": [float(v) for v in sub_logp],
        "word_ix": [int(w) for w in word_ix],
        "vocab_size": int(vocab_size),
    }


def sidecar_id(rid: str) -> str:
    return rid + PROMPT_SIDECAR_SUFFIX


def write_jsonl(path, objs: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path) -> Iterator[dict]:
    """Stream JSON objects from a file, one per non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}: line {lineno} is not a JSON object")
            yield obj


# score files


def orig_key(rid: str) -> str:
    return f"{rid}#orig"


def swap_key(rid: str, i: int) -> str:
    return f"{rid}#swap{i}"


def prompt_key(rid: str, j: int) -> str:
    return f"{rid}#prompt{j}"


def write_scores(path, scores: Mapping[str, float]) -> int:
    """Write a score file with keys in sorted order for stable bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(scores):
            fh.write(json.dumps({"key": key, "logp": float(scores[key])}) + "\n")
    return len(scores)
