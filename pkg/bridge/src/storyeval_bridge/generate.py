"""Top-k sampling from a causal LM into engine records with traces.

Stories are generated to an exact whitespace-word length: sampling
continues until the requested number of words is complete, then the token
stream is cut at the word boundary. Word segmentation happens on the
byte level of the BPE alphabet, so it is exact against the tokens the
model actually produced rather than a re-tokenization of decoded text.

Each trace log-prob is the renormalized probability of the sampled token
within its top-k slice (greedy decoding therefore traces as 0.0
everywhere), matching how the engine's own sampler reports its draws.

Per-story seeds derive from the job seed XOR the story index. Special
tokens are banned from sampling, so stories never terminate early; a
story that hits the context window before reaching its word target is
flagged and skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from . import BridgeError
from .records import build_record, build_trace
from .score import DEFAULT_MAX_CONTEXT, ContextOverflow

logger = logging.getLogger(__name__)

TARGET_WORDS = 150


def _bytes_to_unicode() -> dict[int, str]:
    # the GPT-2 byte/unicode table: printable bytes map to themselves,
    # the rest shift into a private range
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


_U2B = {c: b for b, c in _bytes_to_unicode().items()}
_WS_BYTES = frozenset(b" \t\n\r\v\f")


def _is_ws_char(ch: str) -> bool:
    b = _U2B.get(ch)
    return b is not None and b in _WS_BYTES


@dataclass
class GenConfig:
    k: int
    seed: int
    temperature: float = 1.0
    target_words: int = TARGET_WORDS
    max_context: int = DEFAULT_MAX_CONTEXT

    def __post_init__(self):
        if self.k < 1:
            raise BridgeError("k must be >= 1")
        if self.temperature <= 0:
            raise BridgeError("temperature must be positive")
        if self.target_words < 1:
            raise BridgeError("target word count must be >= 1")


@dataclass
class GeneratedStory:
    tokens: list[str]
    sub_logp: list[float]
    word_ix: list[int]


class StoryGenerator:
    def __init__(self, tokenizer, model, device: str = "cpu"):
        self.tokenizer = tokenizer
        self.model = model
        self.device = device
        self.banned = sorted(
            i for i in set(getattr(tokenizer, "all_special_ids", []) or [])
            if 0 <= i < int(model.config.vocab_size)
        )

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

    def sample_story(self, prompt: str, config: GenConfig, seed: int) -> GeneratedStory:
        """Sample one story of exactly config.target_words whitespace words."""
        import torch

        ctx_ids = [self._bos_id()] + (
            self.tokenizer(prompt, add_special_tokens=False)["input_ids"] if prompt else []
        )
        if len(ctx_ids) >= config.max_context:
            raise ContextOverflow(f"prompt alone fills the context ({len(ctx_ids)} subwords)")

        gen = torch.Generator().manual_seed(seed & 0xFFFFFFFFFFFFFFFF)
        ban_ix = torch.tensor(self.banned, dtype=torch.long) if self.banned else None

        ids = torch.tensor([ctx_ids], device=self.device)
        past = None
        sampled: list[tuple[int, float, str]] = []  # (id, logp, bpe chars)
        chars: list[str] = []
        length = len(ctx_ids)
        while True:
            done, _ = _word_progress(chars, config.target_words)
            if done:
                break
            if length >= config.max_context:
                raise ContextOverflow(
                    f"hit context window at {length} subwords "
                    f"before word {config.target_words}"
                )
            with torch.no_grad():
                out = self.model(ids, past_key_values=past, use_cache=True)
            past = out.past_key_values
            logits = out.logits[0, -1].float().cpu() / config.temperature
            if ban_ix is not None:
                logits[ban_ix] = float("-inf")
            kept = min(config.k, logits.numel() - len(self.banned))
            top = torch.topk(logits, kept)
            slice_logp = torch.log_softmax(top.values, dim=-1)
            pick = torch.multinomial(slice_logp.exp(), 1, generator=gen).item()
            tok_id = int(top.indices[pick])
            piece = self.tokenizer.convert_ids_to_tokens([tok_id])[0]
            sampled.append((tok_id, min(float(slice_logp[pick]), 0.0), piece))
            chars.extend(piece)
            ids = torch.tensor([[tok_id]], device=self.device)
            length += 1

        return _cut_story(sampled, config.target_words)


def _word_progress(chars: list[str], target: int) -> tuple[bool, int]:
    """Whether ``target`` words are complete, and how many are so far.

    A word is complete once a whitespace byte (or nothing yet to end) has
    followed it; generation can stop as soon as the target-th word is
    closed off or a further word has begun.
    """
    words = 0
    in_word = False
    for ch in chars:
        if _is_ws_char(ch):
            if in_word:
                words += 1
                in_word = False
        else:
            if not in_word:
                if words == target:
                    return True, words
                in_word = True
    if in_word:
        words += 1
        return words > target, words - 1
    return words >= target, words


def _cut_story(sampled: list[tuple[int, float, str]], target: int) -> GeneratedStory:
    """Keep the first ``target`` words and the subwords that produced them."""
    # word index per char position; whitespace attaches to the next word
    word_of_char: list[int] = []
    runs: list[list[str]] = []
    in_word = False
    for _, _, piece in sampled:
        for ch in piece:
            if _is_ws_char(ch):
                in_word = False
                word_of_char.append(len(runs))
            else:
                if not in_word:
                    runs.append([])
                    in_word = True
                runs[-1].append(ch)
                word_of_char.append(len(runs) - 1)

    tokens = [_decode_word(run) for run in runs[:target]]
    sub_logp: list[float] = []
    word_ix: list[int] = []
    pos = 0
    for _, logp, piece in sampled:
        first = min(word_of_char[pos:pos + len(piece)], default=target)
        pos += len(piece)
        if first >= target:
            break
        sub_logp.append(logp)
        word_ix.append(first)
    if sorted(set(word_ix)) != list(range(len(tokens))) or any(
        b < a for a, b in zip(word_ix, word_ix[1:])
    ):
        raise BridgeError("generated trace does not align with its own words")
    return GeneratedStory(tokens=tokens, sub_logp=sub_logp, word_ix=word_ix)


def _decode_word(run: list[str]) -> str:
    return bytes(_U2B[c] for c in run).decode("utf-8", errors="replace")


def _sent_bounds(tokens: list[str]) -> list[list[int]]:
    bounds = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok and tok[-1] in ".!?":
            bounds.append([start, i + 1])
            start = i + 1
    if start < len(tokens):
        bounds.append([start, len(tokens)])
    return bounds


def generate_records(
    generator: StoryGenerator,
    prompts: Iterable[str],
    config: GenConfig,
    *,
    model_name: str = "gpt2",
) -> tuple[list[dict], list[str]]:
    """One record per prompt; returns (records, skipped prompt ids)."""
    records = []
    skipped = []
    for i, prompt in enumerate(prompts):
        rid = f"{model_name}-k{config.k}-{i:05d}"
        try:
            story = generator.sample_story(prompt.strip(), config, config.seed ^ i)
        except ContextOverflow as exc:
            logger.warning("prompt %d skipped: %s", i, exc)
            skipped.append(rid)
            continue
        records.append(
            build_record(
                rid, model_name, prompt.strip(), " ".join(story.tokens),
                k=config.k,
                tokens=story.tokens,
                sent_bounds=_sent_bounds(story.tokens),
                trace=build_trace(story.sub_logp, story.word_ix, generator.vocab_size),
            )
        )
    return records, skipped
