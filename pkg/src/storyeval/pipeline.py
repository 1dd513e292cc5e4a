"""Record-stream orchestration: sidecar routing, the PC-removal barrier,
per-record metric fan-out, and the per-record CSV format.

The similarity metric needs a principal component computed over a sentence
batch, so evaluation is two-phase: embed every prompt and story sentence in
the configured scope, compute the component per scope key, then score
records independently (optionally across a worker pool; output order is by
position in the input, so scheduling never changes results).
"""

from __future__ import annotations

import csv
import multiprocessing
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metrics_intrinsic import compute_intrinsic
from .metrics_relatedness import (
    SifConfig,
    compute_relatedness,
    first_principal_component,
    prompt_sentence_tokens,
    sif_embed,
)
from .probes import story_logprob
from .report import MetricValue
from .resources import Resources
from .schema import AnnotatedToken, EvalRecord, story_sentences

PER_RECORD_HEADER = ("record_id", "model", "k", "metric", "value")


@dataclass(frozen=True)
class EvalConfig:
    sif: SifConfig = field(default_factory=SifConfig)
    include_propn: bool = False
    include_aux: bool = False
    workers: int = 1


@dataclass(frozen=True)
class RecordMetrics:
    record_id: str
    model: str
    k: int | None
    values: Mapping[str, float | None]


@dataclass(frozen=True)
class EvalOutcome:
    per_record: tuple[RecordMetrics, ...]
    counts: Mapping[str, int]

    def metric_values(self) -> list[MetricValue]:
        out = []
        for rm in self.per_record:
            for metric, value in rm.values.items():
                out.append(MetricValue(metric=metric, model=rm.model, k=rm.k, value=value))
        return out


def split_sidecars(
    records: Iterable[EvalRecord],
) -> tuple[list[EvalRecord], dict[str, tuple[AnnotatedToken, ...]]]:
    """Separate prompt-sidecar records from the main stream.

    A sidecar's annotations describe the base record's prompt text; only
    annotated sidecars are useful, others are dropped silently.
    """
    main = []
    prompt_annos: dict[str, tuple[AnnotatedToken, ...]] = {}
    for record in records:
        if record.is_prompt_sidecar():
            if record.annotations is not None:
                prompt_annos[record.base_id()] = record.annotations
        else:
            main.append(record)
    return main, prompt_annos


def _scope_key(record: EvalRecord, scope: str) -> tuple:
    if scope == "corpus":
        return ("corpus",)
    return (record.model, record.k)


def compute_components(
    records: Sequence[EvalRecord], resources: Resources, cfg: EvalConfig
) -> dict[tuple, np.ndarray | None]:
    """First principal component per scope batch, from every embeddable
    prompt and story sentence of the records in that scope."""
    components: dict[tuple, np.ndarray | None] = {}
    if (
        not cfg.sif.pc_removal
        or resources.embeddings is None
        or resources.unigrams is None
    ):
        return components
    batches: dict[tuple, list[np.ndarray]] = {}
    for record in records:
        key = _scope_key(record, cfg.sif.pc_scope)
        batch = batches.setdefault(key, [])
        for sent in prompt_sentence_tokens(record):
            v = sif_embed(sent, resources.embeddings, resources.unigrams, cfg.sif)
            if v is not None:
                batch.append(v)
        for sent in story_sentences(record):
            v = sif_embed(sent, resources.embeddings, resources.unigrams, cfg.sif)
            if v is not None:
                batch.append(v)
    for key, batch in batches.items():
        components[key] = (
            first_principal_component(np.stack(batch)) if len(batch) >= 2 else None
        )
    return components


def evaluate_one(
    record: EvalRecord,
    resources: Resources,
    cfg: EvalConfig,
    component: np.ndarray | None,
    prompt_annotations: tuple[AnnotatedToken, ...] | None,
) -> RecordMetrics:
    rows: dict[str, float | None] = {}
    intrinsic = compute_intrinsic(
        record, resources,
        include_propn=cfg.include_propn, include_aux=cfg.include_aux,
    )
    rows.update(intrinsic.as_rows())
    related = compute_relatedness(
        record, resources.embeddings, resources.unigrams, cfg.sif,
        component=component, prompt_annotations=prompt_annotations,
    )
    rows.update(related.as_rows())
    rows["story_logprob"] = (
        story_logprob(record.trace)
        if record.trace is not None and record.trace.sub_logp
        else None
    )
    return RecordMetrics(record_id=record.id, model=record.model, k=record.k, values=rows)


_WORKER_CTX: dict | None = None


def _init_worker(ctx: dict):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _eval_index(i: int) -> RecordMetrics:
    ctx = _WORKER_CTX
    record = ctx["records"][i]
    return evaluate_one(
        record,
        ctx["resources"],
        ctx["cfg"],
        ctx["components"].get(_scope_key(record, ctx["cfg"].sif.pc_scope)),
        ctx["prompt_annos"].get(record.id),
    )


def evaluate_records(
    records: Iterable[EvalRecord], resources: Resources, cfg: EvalConfig
) -> EvalOutcome:
    main, prompt_annos = split_sidecars(records)
    components = compute_components(main, resources, cfg)
    counts = {"records": len(main), "prompt_sidecars": len(prompt_annos)}
    ctx = {
        "records": main,
        "resources": resources,
        "cfg": cfg,
        "components": components,
        "prompt_annos": prompt_annos,
    }
    if cfg.workers > 1 and len(main) > 1:
        with multiprocessing.Pool(
            processes=cfg.workers, initializer=_init_worker, initargs=(ctx,)
        ) as pool:
            per_record = pool.map(_eval_index, range(len(main)))
    else:
        _init_worker(ctx)
        per_record = [_eval_index(i) for i in range(len(main))]
    return EvalOutcome(per_record=tuple(per_record), counts=counts)


# ---------------------------------------------------------------------------
# Per-record CSV


def write_per_record_csv(path, per_record: Iterable[RecordMetrics]) -> None:
    """Long-format per-record values; absent values write as empty cells so
    the aggregate step can keep excluding them."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PER_RECORD_HEADER)
        for rm in per_record:
            k = "" if rm.k is None else rm.k
            for metric in sorted(rm.values):
                value = rm.values[metric]
                writer.writerow(
                    [rm.record_id, rm.model, k, metric, "" if value is None else repr(value)]
                )


def read_per_record_csv(path) -> list[MetricValue]:
    values = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(PER_RECORD_HEADER):
            raise ValueError(f"{path}: unexpected header {header!r}")
        for rec in reader:
            _, model, k_raw, metric, value_raw = rec
            values.append(
                MetricValue(
                    metric=metric,
                    model=model,
                    k=None if k_raw == "" else int(k_raw),
                    value=None if value_raw == "" else float(value_raw),
                )
            )
    return values
