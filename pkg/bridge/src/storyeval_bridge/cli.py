"""Command line entry point for the bridge.

Commands: annotate (raw prompt/story text to annotated records), score
(teacher-forced traces and probe score files from a checkpoint), generate
(top-k sampling into records with traces), filter (drop pairs that
overflow the model context).

Exit codes: 0 success, 1 data or model failure, 2 usage error. Outputs
are engine wire formats only; this tool never computes a metric.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import BridgeError, annotate, filterlen, generate, records, score


def cmd_annotate(args) -> int:
    annotator = annotate.make_annotator(args.backend, args.pipeline)
    out = annotate.annotate_records(
        records.read_jsonl(args.input),
        annotator,
        default_model=args.model_name,
        prompt_sidecars=not args.no_prompt_sidecars,
    )
    n = records.write_jsonl(args.out, out)
    print(f"annotated {n} records ({annotator.name}) -> {args.out}")
    return 0


def cmd_score(args) -> int:
    if not (args.traces_out or args.scores_out):
        raise BridgeError("nothing to do: pass --traces-out and/or --scores-out")
    if (args.swaps or args.candidates) and not args.scores_out:
        raise BridgeError("--swaps/--candidates need --scores-out")
    tokenizer, model = score.load_model(args.model, args.device)
    scorer = score.Scorer(tokenizer, model, args.device, args.max_context)

    outcome = score.run_scoring(
        scorer,
        records.read_jsonl(args.input),
        traces=bool(args.traces_out),
        orig_scores=bool(args.scores_out),
        swaps=args.swaps,
    )
    scores = dict(outcome.scores)
    if args.candidates:
        extra = score.score_candidates(scorer, records.read_jsonl(args.candidates))
        scores.update(extra.scores)
        outcome.skipped.extend(extra.skipped)

    if args.traces_out:
        records.write_jsonl(args.traces_out, outcome.traced)
        print(f"traced {len(outcome.traced)} records -> {args.traces_out}")
    if args.scores_out:
        records.write_scores(args.scores_out, scores)
        print(f"wrote {len(scores)} scores -> {args.scores_out}")
    if outcome.skipped:
        print(
            f"skipped {len(outcome.skipped)} (context overflow): "
            + ", ".join(outcome.skipped[:5])
            + ("..." if len(outcome.skipped) > 5 else "")
        )
    return 0


def cmd_generate(args) -> int:
    config = generate.GenConfig(
        k=args.k,
        seed=args.seed,
        temperature=args.temperature,
        target_words=args.target_words,
        max_context=args.max_context,
    )
    tokenizer, model = score.load_model(args.model, args.device)
    if config.k > int(model.config.vocab_size):
        raise BridgeError(
            f"k ({config.k}) exceeds the model vocabulary ({model.config.vocab_size})"
        )
    gen = generate.StoryGenerator(tokenizer, model, args.device)
    with open(args.prompts, encoding="utf-8") as fh:
        prompts = [line.rstrip("\n") for line in fh if line.strip()]
    recs, skipped = generate.generate_records(gen, prompts, config, model_name=args.model_name)
    records.write_jsonl(args.out, recs)
    print(f"generated {len(recs)} stories at k={config.k} -> {args.out}")
    if skipped:
        print(f"skipped {len(skipped)} (context overflow)")
    return 0


def cmd_filter(args) -> int:
    # the filter only tokenizes, so skip loading weights
    from transformers import AutoTokenizer
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
    try:
        tokenizer = AutoTokenizer.from_pretrained(args.model)
    except Exception as exc:
        raise BridgeError(f"could not load tokenizer from '{args.model}': {exc}") from exc
    counts: dict = {}
    with open(args.input, encoding="utf-8") as src, open(args.out, "w", encoding="utf-8") as dst:
        for line in filterlen.filter_lines(
            tokenizer, src, max_context=args.max_context, counts=counts
        ):
            dst.write(line)
    print(
        f"kept {counts.get('kept', 0)}, dropped {counts.get('dropped', 0)} "
        f"over {args.max_context} subwords -> {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storyeval-bridge",
        description="produce engine records, traces, and score files from real models",
    )
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ann = sub.add_parser("annotate", help="annotate raw prompt/story text")
    p_ann.add_argument("--input", required=True, help="JSONL with prompt/story text")
    p_ann.add_argument("--out", required=True, help="annotated records JSONL")
    p_ann.add_argument("--backend", choices=("spacy", "rule"), default="spacy")
    p_ann.add_argument("--pipeline", default="en_core_web_sm", help="spaCy pipeline name")
    p_ann.add_argument("--model-name", default="human", help="model field for unmarked records")
    p_ann.add_argument(
        "--no-prompt-sidecars", action="store_true",
        help="do not emit '#prompt' records with annotated prompts",
    )
    p_ann.set_defaults(func=cmd_annotate)

    p_score = sub.add_parser("score", help="teacher-forced traces and score files")
    p_score.add_argument("--input", required=True, help="records JSONL")
    p_score.add_argument("--model", required=True, help="causal LM checkpoint path")
    p_score.add_argument("--device", default="cpu")
    p_score.add_argument("--max-context", type=int, default=score.DEFAULT_MAX_CONTEXT)
    p_score.add_argument("--traces-out", help="records JSONL with traces attached")
    p_score.add_argument("--scores-out", help="score file JSONL ('#orig' keys)")
    p_score.add_argument(
        "--swaps", action="store_true",
        help="also score the 14 adjacent-sentence exchanges per record",
    )
    p_score.add_argument("--candidates", help="extra key/prompt/story triples to score")
    p_score.set_defaults(func=cmd_score)

    p_gen = sub.add_parser("generate", help="sample stories with top-k")
    p_gen.add_argument("--model", required=True, help="causal LM checkpoint path")
    p_gen.add_argument("--prompts", required=True, help="one prompt per line")
    p_gen.add_argument("--out", required=True, help="output records JSONL")
    p_gen.add_argument("--k", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--temperature", type=float, default=1.0)
    p_gen.add_argument("--target-words", type=int, default=generate.TARGET_WORDS)
    p_gen.add_argument("--max-context", type=int, default=score.DEFAULT_MAX_CONTEXT)
    p_gen.add_argument("--device", default="cpu")
    p_gen.add_argument("--model-name", default="gpt2", help="model field of emitted records")
    p_gen.set_defaults(func=cmd_generate)

    p_filt = sub.add_parser("filter", help="drop pairs that overflow the context")
    p_filt.add_argument("--input", required=True, help="JSONL with prompt/story fields")
    p_filt.add_argument("--out", required=True, help="kept lines, byte for byte")
    p_filt.add_argument("--model", required=True, help="tokenizer source checkpoint")
    p_filt.add_argument("--max-context", type=int, default=score.DEFAULT_MAX_CONTEXT)
    p_filt.set_defaults(func=cmd_filter)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (BridgeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
