"""Teacher-forced scoring with a causal LM: traces and probe score files.

A trace stores one natural-log probability per story subword together with
the index of the word-level token it belongs to. Alignment comes from the
tokenizer's character offsets against the space-joined token text; a
leading space attaches to the word that follows it. The alignment must
cover every word exactly once, in order, or the record is rejected.

Sequences longer than the model context are not truncated: the record is
flagged and skipped, and the caller reports how many were.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from . import BridgeError
from .records import PROMPT_SIDECAR_SUFFIX, build_trace, orig_key, swap_key

logger = logging.getLogger(__name__)

DEFAULT_MAX_CONTEXT = 1024
SWAP_SENTENCES = 15


class ContextOverflow(Exception):
    """Prompt plus story exceed the model context window."""


def load_model(model_dir: str, device: str = "cpu"):
    """Load a causal LM checkpoint and its tokenizer from a local path."""
    import torch  # noqa: F401
    from transformers import AutoModelForCausalLM, AutoTokenizer
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_dir)
        model = AutoModelForCausalLM.from_pretrained(model_dir)
    except Exception as exc:
        raise BridgeError(f"could not load model from '{model_dir}': {exc}") from exc
    model.to(device)
    model.eval()
    return tokenizer, model


@dataclass
class Scorer:
    """Wraps one loaded model; all scores are natural logs."""

    tokenizer: object
    model: object
    device: str = "cpu"
    max_context: int = DEFAULT_MAX_CONTEXT

    @property
    def vocab_size(self) -> int:
        return int(self.model.config.vocab_size)

    def _bos_id(self) -> int:
        cfg = self.model.config
        for name in ("bos_token_id", "eos_token_id"):
            value = getattr(cfg, name, None)
            if value is not None:
                return int(value)
        raise BridgeError("model config defines neither bos nor eos token id")

    def _encode(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def _continuation_logps(self, prompt: str, continuation: str) -> tuple[list[float], list[int]]:
        """Log-probs of each continuation subword given bos + prompt.

        Returns (per-subword logps, continuation ids). The continuation is
        encoded with a leading space when a prompt precedes it, matching
        how the text would tokenize as one stream.
        """
        import torch

        ctx_ids = [self._bos_id()] + (self._encode(prompt) if prompt else [])
        cont_text = (" " + continuation) if prompt else continuation
        cont_ids = self._encode(cont_text) if continuation else []
        total = len(ctx_ids) + len(cont_ids)
        if total > self.max_context:
            raise ContextOverflow(f"{total} subwords > context {self.max_context}")
        if not cont_ids:
            return [], []
        ids = torch.tensor([ctx_ids + cont_ids], device=self.device)
        with torch.no_grad():
            logits = self.model(ids).logits[0]
        logp = torch.log_softmax(logits.float(), dim=-1)
        # position p predicts token p+1
        first = len(ctx_ids) - 1
        targets = ids[0, len(ctx_ids):]
        picked = logp[first:first + len(cont_ids)].gather(1, targets.unsqueeze(1)).squeeze(1)
        # the wire format requires sub_logp <= 0
        return [min(float(v), 0.0) for v in picked], [int(t) for t in cont_ids]

    def score_text(self, prompt: str, continuation: str) -> float:
        """Total log-prob of continuation after prompt; empty => 0.0."""
        logps, _ = self._continuation_logps(prompt, continuation)
        return float(sum(logps))

    def teacher_forced_trace(self, prompt: str, tokens: list[str]) -> dict:
        """Trace for a story given as word-level tokens."""
        story = " ".join(tokens)
        logps, cont_ids = self._continuation_logps(prompt, story)
        cont_text = (" " + story) if prompt else story
        word_ix = self._align(cont_text, tokens, cont_ids, offset=1 if prompt else 0)
        return build_trace(logps, word_ix, self.vocab_size)

    def _align(self, text: str, tokens: list[str], ids: list[int], *, offset: int) -> list[int]:
        """Map each subword of text to a word index via character offsets.

        ``offset`` is where word 0 starts inside text (1 when a leading
        space was prepended).
        """
        char_word = _char_to_word(text, tokens, offset)
        try:
            enc = self.tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
        except Exception as exc:
            raise BridgeError(
                "tokenizer does not expose character offsets; a fast tokenizer is required"
            ) from exc
        if enc["input_ids"] != ids:
            raise BridgeError("offset encoding disagrees with the scored ids")
        word_ix = []
        for a, b in enc["offset_mapping"]:
            for p in range(a, b):
                if not text[p].isspace():
                    word_ix.append(char_word[p])
                    break
            else:
                # pure-space subword: spaces attach forward
                word_ix.append(char_word[a])
        _check_alignment(word_ix, len(tokens))
        return word_ix


def _char_to_word(text: str, tokens: list[str], offset: int) -> list[int]:
    char_word = [0] * len(text)
    pos = offset
    for w, tok in enumerate(tokens):
        for p in range(pos, pos + len(tok)):
            char_word[p] = w
        # the separator before a word belongs to that word
        if w == 0:
            for p in range(0, offset):
                char_word[p] = 0
        pos += len(tok)
        if w + 1 < len(tokens):
            char_word[pos] = w + 1
            pos += 1
    if pos != len(text):
        raise BridgeError("tokens do not rejoin to the scored text")
    return char_word


def _check_alignment(word_ix: list[int], n_words: int) -> None:
    if any(b < a for a, b in zip(word_ix, word_ix[1:])):
        raise BridgeError("alignment is not nondecreasing")
    if sorted(set(word_ix)) != list(range(n_words)):
        raise BridgeError("alignment does not cover every word exactly once")


@dataclass
class ScoreOutcome:
    traced: list[dict] = field(default_factory=list)
    scores: dict[str, float] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)


def run_scoring(
    scorer: Scorer,
    record_objs: Iterable[dict],
    *,
    traces: bool = True,
    orig_scores: bool = False,
    swaps: bool = False,
) -> ScoreOutcome:
    """Teacher-force a record stream; optionally emit probe score files.

    With ``swaps``, records with at least 15 sentences get "#swap<i>" keys
    for the 14 adjacent-pair exchanges over their first 15 sentences, and
    their "#orig" key scores the same 15-sentence span so the comparison
    is like for like. Without it, "#orig" scores the full story.
    """
    out = ScoreOutcome()
    for obj in record_objs:
        rid = str(obj.get("id", "?"))
        if rid.endswith(PROMPT_SIDECAR_SUFFIX):
            # sidecars only carry prompt annotations; pass them through
            if traces:
                out.traced.append(dict(obj))
            continue
        prompt = str(obj.get("prompt", ""))
        tokens = obj.get("tokens")
        if tokens is None:
            tokens = str(obj.get("story", "")).split()
        tokens = [str(t) for t in tokens]
        try:
            if traces:
                trace = scorer.teacher_forced_trace(prompt, tokens)
                traced = dict(obj)
                traced["trace"] = trace
                out.traced.append(traced)
            if orig_scores and not swaps:
                out.scores[orig_key(rid)] = scorer.score_text(prompt, " ".join(tokens))
            if swaps:
                _score_swaps(scorer, rid, prompt, tokens, obj.get("sent_bounds"), out.scores)
        except ContextOverflow as exc:
            logger.warning("record %s skipped: %s", rid, exc)
            out.skipped.append(rid)
    return out


def _score_swaps(
    scorer: Scorer,
    rid: str,
    prompt: str,
    tokens: list[str],
    sent_bounds,
    scores: dict[str, float],
) -> None:
    if not sent_bounds or len(sent_bounds) < SWAP_SENTENCES:
        return
    sentences = [tokens[a:b] for a, b in sent_bounds[:SWAP_SENTENCES]]
    original = [t for sent in sentences for t in sent]
    scores[orig_key(rid)] = scorer.score_text(prompt, " ".join(original))
    for i in range(1, SWAP_SENTENCES):
        swapped = list(sentences)
        swapped[i - 1], swapped[i] = swapped[i], swapped[i - 1]
        flat = [t for sent in swapped for t in sent]
        scores[swap_key(rid, i)] = scorer.score_text(prompt, " ".join(flat))


def score_candidates(scorer: Scorer, candidates: Iterable[dict]) -> ScoreOutcome:
    """Score explicit (key, prompt, story) triples, e.g. ranking distractors."""
    out = ScoreOutcome()
    for i, obj in enumerate(candidates):
        if "key" not in obj or "story" not in obj:
            raise BridgeError(f"candidate {i} lacks key/story fields")
        try:
            out.scores[str(obj["key"])] = scorer.score_text(
                str(obj.get("prompt", "")), str(obj["story"])
            )
        except ContextOverflow as exc:
            logger.warning("candidate %s skipped: %s", obj["key"], exc)
            out.skipped.append(str(obj["key"]))
    return out
