"""Context-length dataset filter.

Drops (prompt, story) examples whose combined BPE length exceeds the model
context window, the standard preprocessing step before teacher-forced
scoring. Kept lines pass through byte for byte, so filtering never
reformats a dataset.
"""

from __future__ import annotations

from typing import Iterator

import json

from .score import DEFAULT_MAX_CONTEXT


def subword_length(tokenizer, prompt: str, story: str) -> int:
    """BPE length of the pair as one stream (no special tokens)."""

    def enc(text: str) -> list[int]:
        return tokenizer(text, add_special_tokens=False)["input_ids"]

    if prompt:
        return len(enc(prompt)) + len(enc(" " + story))
    return len(enc(story))


def filter_lines(
    tokenizer,
    lines,
    *,
    max_context: int = DEFAULT_MAX_CONTEXT,
    counts: dict | None = None,
) -> Iterator[str]:
    """Yield the raw lines whose records fit the context window."""
    if counts is not None:
        counts.setdefault("kept", 0)
        counts.setdefault("dropped", 0)
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed JSON on line {lineno}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ValueError(f"line {lineno} is not a JSON object")
        prompt = str(obj.get("prompt", ""))
        story = str(obj.get("story", ""))
        # scoring prepends a bos token, so one context slot is spoken for
        if subword_length(tokenizer, prompt, story) < max_context:
            if counts is not None:
                counts["kept"] += 1
            yield raw
        else:
            if counts is not None:
                counts["dropped"] += 1
