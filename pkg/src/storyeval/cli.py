"""Command line entry point.

Commands: eval (records to per-record and aggregated metrics), probe
(rank | swap | confidence, live n-gram scoring or stored score files), gen
(sample stories from a trained n-gram model), train-ngram, baseline (human
truncation), report (aggregate a per-record CSV and emit charts).

Exit codes: 0 success, 1 validation or data failure, 2 usage error. All
randomness flows from --seed; every emitted artifact embeds the config
fingerprint, and identical configs plus inputs produce identical bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import decoding, pipeline, probes, report, schema, textops
from .metrics_relatedness import SifConfig
from .resources import ResourceError, load_resources
from .rng import derive_seed
from .schema import ValidationError


@dataclass(frozen=True)
class RunConfig:
    """Everything that can change a run's output, in one fingerprintable
    bundle."""

    command: str
    input: str | None = None
    resources: str | None = None
    out: str | None = None
    k_list: tuple[int, ...] = ()
    seed: int = 0
    workers: int = 1
    skip_invalid: bool = False
    pc_scope: str = "model-k"
    pc_removal: bool = True
    sif_a: float = 1e-3
    include_propn: bool = False
    tie_policy: str = "strict"

    def fingerprint_payload(self, resource_hashes: dict | None = None) -> dict:
        payload = asdict(self)
        payload["k_list"] = list(self.k_list)
        # paths and parallelism cannot change results, so they stay out
        payload.pop("input", None)
        payload.pop("out", None)
        payload.pop("workers", None)
        payload["resource_hashes"] = dict(resource_hashes or {})
        return payload


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_main_records(args):
    counts: dict[str, int] = {}
    records = list(
        schema.load_records(args.input, skip_invalid=args.skip_invalid, counts=counts)
    )
    main, prompt_annos = pipeline.split_sidecars(records)
    return main, prompt_annos, counts


def _emit_json(payload: dict, out_path: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Commands


def cmd_eval(args) -> int:
    cfg = RunConfig(
        command="eval", input=args.input, resources=args.resources, out=args.out,
        seed=args.seed, workers=args.workers, skip_invalid=args.skip_invalid,
        pc_scope=args.pc_scope, pc_removal=not args.no_pc_removal,
        sif_a=args.sif_a, include_propn=args.include_propn,
    )
    res = load_resources(args.resources)
    counts: dict[str, int] = {}
    records = list(
        schema.load_records(args.input, skip_invalid=args.skip_invalid, counts=counts)
    )
    eval_cfg = pipeline.EvalConfig(
        sif=SifConfig(a=cfg.sif_a, pc_removal=cfg.pc_removal, pc_scope=cfg.pc_scope),
        include_propn=cfg.include_propn,
        workers=cfg.workers,
    )
    outcome = pipeline.evaluate_records(records, res, eval_cfg)
    fingerprint = report.fingerprint_config(cfg.fingerprint_payload(res.hashes))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_per_record_csv(out / "per_record.csv", outcome.per_record)
    agg = report.aggregate(outcome.metric_values(), fingerprint)
    report.emit_csv(agg, out / "metrics.csv")
    report.write_manifest(
        out / "manifest.json",
        {
            "config": cfg.fingerprint_payload(res.hashes),
            "fingerprint": fingerprint,
            "counts": {**counts, **outcome.counts},
            "input_sha256": _file_sha256(args.input),
        },
    )
    print(
        f"evaluated {outcome.counts['records']} records "
        f"({outcome.counts['prompt_sidecars']} prompt sidecars); "
        f"wrote {out / 'per_record.csv'} and {out / 'metrics.csv'}"
    )
    return 0


def _probe_scorer(args, parser):
    if getattr(args, "scores", None) and getattr(args, "model", None):
        parser.error("--scores and --model are mutually exclusive")
    if getattr(args, "scores", None):
        return None, probes.load_scores(args.scores)
    if getattr(args, "model", None):
        return decoding.load_ngram(args.model), None
    parser.error("one of --scores or --model is required")


def cmd_probe_rank(args, parser) -> int:
    main, _, counts = _load_main_records(args)
    scorer, scores = _probe_scorer(args, parser)
    if scores is not None:
        acc = probes.prompt_ranking_from_scores(
            scores, [r.id for r in main], tie_policy=args.tie_policy
        )
    else:
        acc = probes.prompt_ranking_accuracy(
            scorer, main, (r.prompt_text for r in main),
            seed=args.seed, tie_policy=args.tie_policy,
        )
    _emit_json(
        {
            "probe": "rank",
            "prompt_ranking_acc": acc,
            "stories": len(main),
            "seed": args.seed,
            "tie_policy": args.tie_policy,
            "counts": counts,
        },
        args.out,
    )
    return 0


def cmd_probe_swap(args, parser) -> int:
    main, _, counts = _load_main_records(args)
    scorer, scores = _probe_scorer(args, parser)
    if scores is not None:
        result = probes.swap_probe_from_scores(scores, [r.id for r in main])
    else:
        result = probes.swap_probe(scorer, main)
    _emit_json(
        {
            "probe": "swap",
            "swap_error_rate": result.error_rate,
            "swap_mean_rank": {str(pos): r for pos, r in sorted(result.mean_rank.items())},
            "scored": result.scored,
            "skipped": result.skipped,
            "counts": counts,
        },
        args.out,
    )
    return 0


def cmd_probe_confidence(args, parser) -> int:
    main, _, counts = _load_main_records(args)
    traces = [r.trace for r in main if r.trace is not None]
    if not traces and getattr(args, "model", None):
        scorer = decoding.load_ngram(args.model)
        traces = [
            probes.teacher_forced_trace(
                scorer, textops.tokenize_words(r.prompt_text), list(r.tokens)
            )
            for r in main
        ]
    if not traces:
        parser.error("records carry no traces; supply --model for teacher forcing")
    curve, used, excluded = probes.confidence_curve(traces, horizon=args.horizon)
    logprobs = [probes.story_logprob(t) for t in traces if t.sub_logp]
    _emit_json(
        {
            "probe": "confidence",
            "confidence_curve": {str(pos): v for pos, v in sorted(curve.items())},
            "traces_used": used,
            "traces_excluded": excluded,
            "word_perplexity": probes.word_perplexity(traces),
            "story_logprob_mean": sum(logprobs) / len(logprobs),
            "counts": counts,
        },
        args.out,
    )
    return 0


def cmd_gen(args) -> int:
    model = decoding.load_ngram(args.model)
    prompts = [
        line.strip()
        for line in Path(args.prompts).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not prompts:
        raise ValueError(f"{args.prompts}: no prompts")
    records = []
    index = 0
    for k in args.k:
        for prompt in prompts:
            cfg = decoding.SamplerConfig(
                k=k, temperature=args.temperature, target_len=args.target_len,
                seed=derive_seed(args.seed, index),
            )
            tokens, trace = decoding.generate(
                model, textops.tokenize_words(prompt), cfg
            )
            records.append(
                schema.EvalRecord(
                    id=f"{args.model_name}-k{k}-{index:05d}",
                    model=args.model_name,
                    k=k,
                    prompt_text=prompt,
                    story_text=" ".join(tokens),
                    tokens=tuple(tokens),
                    sent_bounds=tuple(textops.split_sentences(tokens)),
                    trace=trace,
                )
            )
            index += 1
    n = schema.write_records(args.out, records)
    print(f"wrote {n} records to {args.out} (k in {sorted(set(args.k))}, seed {args.seed})")
    return 0


def cmd_train_ngram(args) -> int:
    text = Path(args.corpus).read_text(encoding="utf-8")
    tokens = textops.tokenize_words(text)
    model = decoding.train_ngram(tokens, order=args.order, discount=args.discount)
    decoding.save_ngram(model, args.out)
    print(
        f"trained order-{args.order} model on {len(tokens)} tokens "
        f"(vocab {len(model.vocab)}); wrote {args.out}"
    )
    return 0


def cmd_baseline(args) -> int:
    counts: dict[str, int] = {}
    records = schema.load_records(args.input, skip_invalid=args.skip_invalid, counts=counts)
    kept = schema.write_records(
        args.out,
        schema.build_human_baseline(records, target_len=args.target_len, counts=counts),
    )
    print(
        f"kept {kept} human records at {args.target_len} tokens "
        f"(dropped {counts.get('dropped_short', 0)} short, "
        f"{counts.get('dropped_nonhuman', 0)} non-human); wrote {args.out}"
    )
    return 0


def cmd_report(args) -> int:
    values = pipeline.read_per_record_csv(args.input)
    agg = report.aggregate(values, fingerprint=args.fingerprint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.emit_csv(agg, out / "metrics.csv")
    written = [str(out / "metrics.csv")]
    if args.svg:
        metrics = args.metrics.split(",") if args.metrics else agg.metrics()
        for metric in metrics:
            svg_path = out / f"{metric}.svg"
            report.emit_svg(agg, metric, svg_path)
            written.append(str(svg_path))
    print("wrote " + ", ".join(written))
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storyeval",
        description="Evaluation engine for open-ended story generation across the top-k spectrum.",
    )
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p, required=True):
        p.add_argument("--input", required=required, help="records JSONL file")
        p.add_argument(
            "--skip-invalid", action="store_true",
            help="count and skip records failing validation instead of aborting",
        )

    p_eval = sub.add_parser("eval", help="compute per-record metrics and aggregates")
    add_input(p_eval)
    p_eval.add_argument(
        "--resources",
        help="resource directory (default: $STORYEVAL_RESOURCES, then bundled data)",
    )
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--pc-scope", choices=("model-k", "corpus"), default="model-k")
    p_eval.add_argument(
        "--no-pc-removal", action="store_true",
        help="skip principal-component removal in sentence embeddings",
    )
    p_eval.add_argument("--sif-a", type=float, default=1e-3, help="embedding weight parameter")
    p_eval.add_argument(
        "--include-propn", action="store_true",
        help="count PROPN tokens into noun concreteness",
    )
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_eval)

    p_probe = sub.add_parser("probe", help="run a model probe")
    probe_sub = p_probe.add_subparsers(dest="probe_command", required=True)

    def add_probe_common(p):
        add_input(p)
        p.add_argument("--scores", help="stored score JSONL (key/logp)")
        p.add_argument("--model", help="trained n-gram model file")
        p.add_argument("--out", help="write the result JSON here instead of stdout")

    p_rank = probe_sub.add_parser("rank", help="prompt ranking accuracy")
    add_probe_common(p_rank)
    p_rank.add_argument("--seed", type=int, default=0)
    p_rank.add_argument("--tie-policy", choices=("strict", "lenient"), default="strict")
    p_rank.set_defaults(func=lambda a: cmd_probe_rank(a, parser))

    p_swap = probe_sub.add_parser("swap", help="adjacent-sentence swap probe")
    add_probe_common(p_swap)
    p_swap.set_defaults(func=lambda a: cmd_probe_swap(a, parser))

    p_conf = probe_sub.add_parser("confidence", help="confidence curve and perplexity")
    add_probe_common(p_conf)
    p_conf.add_argument("--horizon", type=int, default=probes.CONFIDENCE_HORIZON)
    p_conf.set_defaults(func=lambda a: cmd_probe_confidence(a, parser))

    p_gen = sub.add_parser("gen", help="sample stories from a trained n-gram model")
    p_gen.add_argument("--model", required=True, help="trained n-gram model file")
    p_gen.add_argument("--prompts", required=True, help="one prompt per line")
    p_gen.add_argument(
        "--k", type=int, action="append", required=True,
        help="truncation size; repeat the flag for a sweep",
    )
    p_gen.add_argument("--temperature", type=float, default=1.0)
    p_gen.add_argument("--target-len", type=int, default=150)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--model-name", default="ngram", help="model field of emitted records")
    p_gen.add_argument("--out", required=True, help="output records JSONL")
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train-ngram", help="train the reference n-gram model")
    p_train.add_argument("--corpus", required=True, help="raw text file")
    p_train.add_argument("--order", type=int, default=decoding.DEFAULT_ORDER)
    p_train.add_argument("--discount", type=float, default=decoding.DEFAULT_DISCOUNT)
    p_train.add_argument("--out", required=True, help="model file to write")
    p_train.set_defaults(func=cmd_train_ngram)

    p_base = sub.add_parser("baseline", help="truncate human records to a fixed length")
    add_input(p_base)
    p_base.add_argument("--target-len", type=int, default=schema.BASELINE_LENGTH)
    p_base.add_argument("--out", required=True, help="output records JSONL")
    p_base.set_defaults(func=cmd_baseline)

    p_rep = sub.add_parser("report", help="aggregate a per-record CSV and emit charts")
    p_rep.add_argument("--input", required=True, help="per-record CSV from eval")
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.add_argument("--metrics", help="comma-separated metric names for charts")
    p_rep.add_argument("--svg", action="store_true", help="emit one SVG chart per metric")
    p_rep.add_argument("--fingerprint", default="", help="config fingerprint to embed")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValidationError, ResourceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
