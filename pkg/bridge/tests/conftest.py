"""Shared fixtures: a tiny, fully local GPT-2 so no test touches the network.

The tokenizer is byte-level BPE over all 256 bytes plus merge chains for a
small word list, which keeps generated text segmentable into words at a
reasonable rate. The model is a randomly initialized 2-layer GPT-2 with a
pinned torch seed, saved once per session and loaded through the same
checkpoint-path route real models use.
"""

from __future__ import annotations

import json
import shutil

import pytest

# words with merge chains; generation then emits word-per-token pieces often
FIXTURE_WORDS = [
    "the", "a", "and", "was", "she", "he", "it", "old", "sea", "cat",
    "dog", "sat", "ran", "day", "night", "door", "light", "hand", "eyes", "time",
]


def _bytes_to_unicode() -> dict[int, str]:
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


def build_tiny_checkpoint(directory) -> int:
    """Write tokenizer and random model files; returns the vocab size."""
    import torch
    from transformers import GPT2Config, GPT2LMHeadModel, GPT2TokenizerFast
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()

    b2u = _bytes_to_unicode()
    vocab = {b2u[b]: i for i, b in enumerate(range(256))}
    nxt = 256
    vocab["<|endoftext|>"] = nxt
    nxt += 1
    merges = []

    def grow(start: str, rest: str):
        nonlocal nxt
        cur = start
        for ch in rest:
            new = cur + ch
            if new not in vocab:
                vocab[new] = nxt
                nxt += 1
                merges.append((cur, ch))
            cur = new

    for w in FIXTURE_WORDS:
        grow("Ġ", w)  # leading-space form
        grow(w[0], w[1:])  # bare form for text starts

    with open(directory / "vocab.json", "w", encoding="utf-8") as fh:
        json.dump(vocab, fh, ensure_ascii=False)
    with open(directory / "merges.txt", "w", encoding="utf-8") as fh:
        fh.write("#version: 0.2\n")
        for a, b in merges:
            fh.write(f"{a} {b}\n")
    tokenizer = GPT2TokenizerFast.from_pretrained(str(directory))
    tokenizer.save_pretrained(str(directory))

    torch.manual_seed(0)
    config = GPT2Config(
        vocab_size=len(vocab), n_positions=2048, n_embd=32, n_layer=2,
        n_head=2, bos_token_id=256, eos_token_id=256,
    )
    GPT2LMHeadModel(config).save_pretrained(str(directory))
    return len(vocab)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("tiny_gpt2")
    build_tiny_checkpoint(directory)
    return directory


@pytest.fixture(scope="session")
def tiny_scorer(tiny_model_dir):
    from storyeval_bridge.score import Scorer, load_model

    tokenizer, model = load_model(str(tiny_model_dir))
    return Scorer(tokenizer, model)


@pytest.fixture(scope="session")
def tiny_generator(tiny_model_dir):
    from storyeval_bridge.generate import StoryGenerator
    from storyeval_bridge.score import load_model

    tokenizer, model = load_model(str(tiny_model_dir))
    return StoryGenerator(tokenizer, model)


@pytest.fixture(scope="session")
def primary_cli() -> str:
    """Path of the installed engine CLI; the bridge talks to it as a
    subprocess, never as a library."""
    path = shutil.which("storyeval")
    if path is None:
        pytest.fail("the storyeval engine CLI is not on PATH; install the primary package")
    return path


@pytest.fixture
def report_line(capsys):
    def emit(name: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    return emit
