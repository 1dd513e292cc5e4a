"""Aggregation of per-record metric values into (model, k) rows, CSV
round-tripping, deterministic SVG charts, and run fingerprinting.

CSV is long-format with the exact header
"metric,model,k,mean,stderr,n,fingerprint"; the k column holds "human" for
baseline rows. Floats are written with repr so parse-back reproduces the
report bit for bit. SVG output is byte-deterministic for a fixed report:
fixed canvas, fixed palette, log-scaled k axis, one series per model, and a
dashed horizontal line for the human baseline.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

log = logging.getLogger(__name__)

CSV_HEADER = ("metric", "model", "k", "mean", "stderr", "n", "fingerprint")

_CANVAS_W = 640
_CANVAS_H = 400
_MARGIN_L = 70
_MARGIN_R = 20
_MARGIN_T = 30
_MARGIN_B = 50
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class MetricValue(NamedTuple):
    metric: str
    model: str
    k: int | None
    value: float | None


@dataclass(frozen=True)
class ReportRow:
    metric: str
    model: str
    k: int | None
    mean: float
    stderr: float
    n: int
    fingerprint: str


@dataclass(frozen=True)
class MetricReport:
    rows: tuple[ReportRow, ...]

    def for_metric(self, metric: str) -> list[ReportRow]:
        return [r for r in self.rows if r.metric == metric]

    def metrics(self) -> list[str]:
        return sorted({r.metric for r in self.rows})


def _stderr(values: list[float], mean: float) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return math.sqrt(var) / math.sqrt(n)


def aggregate(values: Iterable[MetricValue], fingerprint: str = "") -> MetricReport:
    """Mean, standard error of the mean, and n per (metric, model, k).

    Absent values are excluded; a group left empty by exclusion produces a
    warning instead of a row.
    """
    groups: dict[tuple[str, str, int | None], list[float]] = {}
    absent: dict[tuple[str, str, int | None], int] = {}
    for mv in values:
        key = (mv.metric, mv.model, mv.k)
        if mv.value is None:
            absent[key] = absent.get(key, 0) + 1
            groups.setdefault(key, [])
            continue
        groups.setdefault(key, []).append(float(mv.value))
    rows = []
    for key in sorted(groups, key=lambda t: (t[0], t[1], t[2] is not None, t[2] or 0)):
        vals = groups[key]
        if not vals:
            log.warning("group %s has only absent values, dropped", key)
            continue
        mean = sum(vals) / len(vals)
        rows.append(
            ReportRow(
                metric=key[0], model=key[1], k=key[2],
                mean=mean, stderr=_stderr(vals, mean), n=len(vals),
                fingerprint=fingerprint,
            )
        )
    return MetricReport(rows=tuple(rows))


# ---------------------------------------------------------------------------
# CSV


def emit_csv(report: MetricReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in report.rows:
            writer.writerow(
                [
                    row.metric,
                    row.model,
                    "human" if row.k is None else row.k,
                    repr(row.mean),
                    repr(row.stderr),
                    row.n,
                    row.fingerprint,
                ]
            )


def load_csv(path) -> MetricReport:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_HEADER):
            raise ValueError(f"{path}: unexpected header {header!r}")
        for rec in reader:
            metric, model, k_raw, mean, stderr, n, fp = rec
            rows.append(
                ReportRow(
                    metric=metric, model=model,
                    k=None if k_raw == "human" else int(k_raw),
                    mean=float(mean), stderr=float(stderr), n=int(n), fingerprint=fp,
                )
            )
    return MetricReport(rows=tuple(rows))


# ---------------------------------------------------------------------------
# SVG


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def emit_svg(report: MetricReport, metric: str, path) -> None:
    """Line chart of one metric across k, one series per model, with the
    human baseline as a dashed horizontal line."""
    rows = report.for_metric(metric)
    if not rows:
        raise ValueError(f"unknown metric {metric!r}")
    series_rows = [r for r in rows if r.k is not None]
    baseline_rows = [r for r in rows if r.k is None]

    ks = sorted({r.k for r in series_rows})
    ys = [r.mean for r in rows]
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    if ks:
        x_lo = math.log10(ks[0])
        x_hi = math.log10(ks[-1])
        if x_hi == x_lo:
            x_lo -= 0.5
            x_hi += 0.5
    else:
        x_lo, x_hi = 0.0, 1.0

    plot_w = _CANVAS_W - _MARGIN_L - _MARGIN_R
    plot_h = _CANVAS_H - _MARGIN_T - _MARGIN_B

    def sx(k: int) -> float:
        return _MARGIN_L + (math.log10(k) - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return _MARGIN_T + (y_hi - v) / (y_hi - y_lo) * plot_h

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CANVAS_W}" '
        f'height="{_CANVAS_H}" viewBox="0 0 {_CANVAS_W} {_CANVAS_H}">'
    )
    out.append(f'<rect width="{_CANVAS_W}" height="{_CANVAS_H}" fill="white"/>')
    out.append(
        f'<text x="{_CANVAS_W // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{metric}</text>'
    )
    ax_bottom = _MARGIN_T + plot_h
    out.append(
        f'<line x1="{_MARGIN_L}" y1="{ax_bottom}" x2="{_MARGIN_L + plot_w}" '
        f'y2="{ax_bottom}" stroke="black"/>'
    )
    out.append(
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{ax_bottom}" stroke="black"/>'
    )
    out.append(
        f'<text x="{_MARGIN_L + plot_w // 2}" y="{_CANVAS_H - 10}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">k (log scale)</text>'
    )
    for k in ks:
        x = _fmt(sx(k))
        out.append(
            f'<line x1="{x}" y1="{ax_bottom}" x2="{x}" y2="{ax_bottom + 4}" stroke="black"/>'
        )
        out.append(
            f'<text x="{x}" y="{ax_bottom + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{k}</text>'
        )
    for i in range(5):
        v = y_lo + (y_hi - y_lo) * i / 4
        y = _fmt(sy(v))
        out.append(
            f'<line x1="{_MARGIN_L - 4}" y1="{y}" x2="{_MARGIN_L}" y2="{y}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 8}" y="{y}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{v:.4g}</text>'
        )

    models = sorted({r.model for r in series_rows})
    for mi, model in enumerate(models):
        color = _PALETTE[mi % len(_PALETTE)]
        pts = sorted((r.k, r.mean) for r in series_rows if r.model == model)
        coords = " ".join(f"{_fmt(sx(k))},{_fmt(sy(v))}" for k, v in pts)
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
        )
        for k, v in pts:
            out.append(
                f'<circle class="pt" cx="{_fmt(sx(k))}" cy="{_fmt(sy(v))}" '
                f'r="3" fill="{color}"/>'
            )
        out.append(
            f'<text x="{_MARGIN_L + plot_w - 4}" y="{_MARGIN_T + 14 + 14 * mi}" '
            f'text-anchor="end" font-family="sans-serif" font-size="11" '
            f'fill="{color}">{model}</text>'
        )

    for row in sorted(baseline_rows, key=lambda r: r.model):
        y = _fmt(sy(row.mean))
        out.append(
            f'<line x1="{_MARGIN_L}" y1="{y}" x2="{_MARGIN_L + plot_w}" y2="{y}" '
            f'stroke="#555555" stroke-dasharray="6,4"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L + 4}" y="{_fmt(sy(row.mean) - 4)}" '
            f'font-family="sans-serif" font-size="10" fill="#555555">{row.model}</text>'
        )

    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# Fingerprint and manifest


def fingerprint_config(config: Mapping) -> str:
    """sha256 over the canonical JSON form of every reproducibility-relevant
    config value (seeds, SIF settings, resource hashes, ...)."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(path, manifest: Mapping) -> None:
    """Canonical, timestamp-free manifest so identical runs produce
    identical bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
