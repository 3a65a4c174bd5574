"""Provenance of the transferred annotations, one row per target attribute."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._io import atomic_write_text, format_csv

COLUMNS = [
    "attribute",
    "category",
    "class",
    "main_source",
    "threshold",
    "coverage",
    "calibration_accuracy",
    "final_coverage",
    "notes",
]


@dataclass
class ProvenanceRow:
    attribute: str
    category: str
    class_name: str
    main_source: str
    threshold: float
    coverage: float
    calibration_accuracy: float
    final_coverage: float
    notes: str


def provenance_report(result) -> list[ProvenanceRow]:
    return provenance_rows(result.labels, result.schema, result.choice, [(r.name, r.table) for r in result.sources])


def provenance_rows(labels, schema, choice, tables) -> list[ProvenanceRow]:
    """One row per attribute; the main source is the one supplying most final annotations.

    ``tables`` lists ``(source name, CalibrationTable)`` in the order that
    ``choice`` indexes.
    """
    rows = []
    n = labels.shape[0]
    for k, spec in enumerate(schema):
        counts = np.bincount(choice[:, k][choice[:, k] >= 0], minlength=len(tables))
        notes = []
        for name, table in tables:
            entry = table.entries.get(spec.name)
            if entry is not None and not entry.retained:
                notes.append(f"{name}: {entry.reason}")
        if counts.sum() == 0:
            main, thr, cov, acc = "-", math.nan, math.nan, math.nan
        else:
            main, table = tables[int(np.argmax(counts))]
            entry = table[spec.name]
            thr, cov, acc = entry.threshold, entry.coverage, entry.balanced_accuracy
        final = float((labels[:, k] != 0).mean()) if n else 0.0
        rows.append(ProvenanceRow(spec.name, spec.category, spec.class_name, main, thr, cov, acc, final, "; ".join(notes)))
    return rows


def _num(x, digits=4):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def provenance_csv(rows, meta=None) -> str:
    body = (
        [
            r.attribute,
            r.category,
            r.class_name,
            r.main_source,
            _num(r.threshold, 6),
            _num(r.coverage),
            _num(r.calibration_accuracy),
            _num(r.final_coverage),
            r.notes,
        ]
        for r in rows
    )
    return format_csv(COLUMNS, body, meta)


def provenance_text(rows) -> str:
    """Fixed-width table: main source, category, class, attribute and calibration figures."""
    head = ["Main source", "Category", "Class", "Attribute", "Threshold", "Coverage", "Cal. acc", "Annotated"]
    cells = [
        [r.main_source, r.category, r.class_name, r.attribute, _num(r.threshold), _num(r.coverage, 2),
         _num(r.calibration_accuracy, 2), _num(r.final_coverage, 2)]
        for r in rows
    ]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h) for i, h in enumerate(head)]
    numeric = {4, 5, 6, 7}

    def line(vals):
        return "  ".join(v.rjust(w) if i in numeric else v.ljust(w) for i, (v, w) in enumerate(zip(vals, widths))).rstrip()

    out = [line(head), "-" * (sum(widths) + 2 * (len(widths) - 1))]
    out += [line(c) for c in cells]
    discards = [f"  {r.attribute}: {r.notes}" for r in rows if r.notes]
    if discards:
        out += ["", "Discarded:"] + discards
    return "\n".join(out) + "\n"


def write_provenance(rows, csv_path, text_path, meta=None):
    atomic_write_text(csv_path, provenance_csv(rows, meta))
    atomic_write_text(text_path, provenance_text(rows))
