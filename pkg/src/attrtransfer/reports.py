"""Annotation statistics and annotation-quality reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._io import format_csv


@dataclass
class StatsRow:
    attribute: str
    positive: float
    negative: float
    undefined: float


@dataclass
class StatsReport:
    rows: list[StatsRow]
    total: StatsRow
    defined_mean: float
    defined_std: float
    n_samples: int


def annotation_stats(annotations, names: Sequence[str]) -> StatsReport:
    """Percentages of positive, negative and undefined annotations per attribute.

    The spread of defined annotations per sample is the population standard
    deviation.
    """
    a = np.asarray(annotations)
    n = a.shape[0]

    def pct(mask):
        return 100.0 * mask.mean(axis=0) if n else np.zeros(a.shape[1])

    pos, neg, und = pct(a == 1), pct(a == -1), pct(a == 0)
    rows = [StatsRow(nm, float(p), float(q), float(u)) for nm, p, q, u in zip(names, pos, neg, und)]
    size = a.size or 1
    total = StatsRow(
        "Total", 100.0 * (a == 1).sum() / size, 100.0 * (a == -1).sum() / size, 100.0 * (a == 0).sum() / size
    )
    defined = (a != 0).sum(axis=1)
    mean = float(defined.mean()) if n else 0.0
    std = float(defined.std()) if n else 0.0
    return StatsReport(rows, total, mean, std, n)


def stats_csv(report: StatsReport, meta=None) -> str:
    body = [[r.attribute, f"{r.positive:.4f}", f"{r.negative:.4f}", f"{r.undefined:.4f}"] for r in report.rows + [report.total]]
    return format_csv(["attribute", "positive", "negative", "undefined"], body, meta)


def stats_text(report: StatsReport) -> str:
    width = max(len("Attribute"), *(len(r.attribute) for r in report.rows + [report.total]))
    lines = [f"{'Attribute':<{width}}  {'Positive':>8}  {'Negative':>8}  {'Undefined':>9}"]
    lines.append("-" * len(lines[0]))
    for r in report.rows + [report.total]:
        if r is report.total:
            lines.append("-" * len(lines[0]))
        lines.append(f"{r.attribute:<{width}}  {r.positive:7.1f}%  {r.negative:7.1f}%  {r.undefined:8.1f}%")
    lines.append("")
    lines.append(f"Samples: {report.n_samples}")
    lines.append(f"Defined annotations per sample: {report.defined_mean:.1f} ± {report.defined_std:.1f}")
    return "\n".join(lines) + "\n"


@dataclass
class QualityRow:
    attribute: str
    accuracy: float
    precision: float
    recall: float
    balanced_accuracy: float
    n: int


def _quality(pred, truth, name) -> QualityRow:
    both = (pred != 0) & (truth != 0)
    p, t = pred[both], truth[both]
    n = int(both.sum())
    if n == 0:
        return QualityRow(name, math.nan, math.nan, math.nan, math.nan, 0)
    tp = int(((p == 1) & (t == 1)).sum())
    fp = int(((p == 1) & (t == -1)).sum())
    fn = int(((p == -1) & (t == 1)).sum())
    tn = int(((p == -1) & (t == -1)).sum())
    recalls = []
    if tp + fn:
        recalls.append(tp / (tp + fn))
    if tn + fp:
        recalls.append(tn / (tn + fp))
    return QualityRow(
        name,
        (tp + tn) / n,
        tp / (tp + fp) if tp + fp else math.nan,
        tp / (tp + fn) if tp + fn else math.nan,
        sum(recalls) / len(recalls),
        n,
    )


def quality_report(predicted, truth, names: Sequence[str]) -> tuple[list[QualityRow], QualityRow]:
    """Accuracy, precision and recall against a reference, per attribute and pooled.

    Only cells defined in both matrices count; attributes without such cells
    get NaN metrics (reported as N/A).
    """
    pred = np.asarray(predicted)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction and truth shapes differ: {pred.shape} vs {truth.shape}")
    rows = [_quality(pred[:, k], truth[:, k], n) for k, n in enumerate(names)]
    total = _quality(pred.ravel(), truth.ravel(), "Total")
    return rows, total


def _fmt(x, spec):
    return "N/A" if isinstance(x, float) and math.isnan(x) else format(x, spec)


def quality_csv(rows, total, meta=None) -> str:
    body = [
        [r.attribute, _fmt(r.accuracy, ".4f"), _fmt(r.precision, ".4f"), _fmt(r.recall, ".4f"),
         _fmt(r.balanced_accuracy, ".4f"), str(r.n)]
        for r in rows + [total]
    ]
    return format_csv(["attribute", "accuracy", "precision", "recall", "balanced_accuracy", "n"], body, meta)


def quality_text(rows, total) -> str:
    width = max(len("Attribute"), *(len(r.attribute) for r in rows + [total]))
    head = f"{'Attribute':<{width}}  {'Acc':>4}  {'Precision':>9}  {'Recall':>6}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.attribute:<{width}}  {_fmt(r.accuracy, '.2f'):>4}  {_fmt(r.precision, '.2f'):>9}  {_fmt(r.recall, '.2f'):>6}")
    lines.append("-" * len(head))
    lines.append(
        f"{total.attribute:<{width}}  {_fmt(total.accuracy, '.2f'):>4}  {_fmt(total.precision, '.2f'):>9}  {_fmt(total.recall, '.2f'):>6}"
    )
    return "\n".join(lines) + "\n"
