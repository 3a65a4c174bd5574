"""Turning predictions into annotations: rejection, multi-source choice, plausibility repair."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..datamodel.schema import AttributeSchema
from ..errors import ShapeError
from .calibration import CalibrationTable


@dataclass
class SourcePredictions:
    """Predictions ``p`` (over {+1, -1}) and reliabilities ``r`` of one source on the target."""

    name: str
    schema: AttributeSchema
    p: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.int8)
        self.r = np.asarray(self.r, dtype=np.float64)
        if self.p.shape != self.r.shape or self.p.ndim != 2 or self.p.shape[1] != len(self.schema):
            raise ShapeError(f"{self.name}: p and r must both have shape (N, {len(self.schema)})")


@dataclass
class SourceAnnotations:
    """A source's transferred annotations together with what is needed to rank them."""

    name: str
    schema: AttributeSchema
    labels: np.ndarray
    r: np.ndarray
    table: CalibrationTable


def transfer(predictions: SourcePredictions, table: CalibrationTable) -> np.ndarray:
    """Keep a prediction when its reliability reaches the threshold, else 0.

    Attributes discarded during calibration yield an all-zero column.
    """
    out = np.zeros_like(predictions.p)
    for k, name in enumerate(predictions.schema.names):
        entry = table.entries.get(name)
        if entry is None or not entry.retained:
            continue
        keep = predictions.r[:, k] >= entry.threshold
        out[keep, k] = predictions.p[keep, k]
    return out


def merged_schema(sources: Sequence[SourceAnnotations], schema: AttributeSchema | None = None) -> AttributeSchema:
    """The target schema: ``schema`` if given, else the union of the sources in first-seen order."""
    if schema is None:
        specs, seen = [], set()
        for s in sources:
            for a in s.schema:
                if a.name not in seen:
                    seen.add(a.name)
                    specs.append(a)
        schema = AttributeSchema(specs)
    for s in sources:
        schema.check_compatible(s.schema)
    return schema


def aggregate(
    sources: Sequence[SourceAnnotations],
    schema: AttributeSchema | None = None,
    priority: Sequence[str] | None = None,
    return_choice: bool = False,
):
    """Combine per-source annotations into target annotations.

    For each cell the non-zero candidate whose source maps its reliability to
    the highest test-set accuracy wins. Equal accuracies go to the source that
    comes first in ``priority`` (default: the order of ``sources``).
    With ``return_choice`` the index (into ``sources``) of the winning source
    per cell is returned as well, -1 where no source annotated.
    """
    if not sources:
        raise ValueError("no sources to aggregate")
    schema = merged_schema(sources, schema)
    if priority is not None:
        rank = {name: i for i, name in enumerate(priority)}
        missing = [s.name for s in sources if s.name not in rank]
        if missing:
            raise ValueError(f"sources missing from priority list: {missing}")
        order = sorted(range(len(sources)), key=lambda i: rank[sources[i].name])
    else:
        order = list(range(len(sources)))
    n = sources[0].labels.shape[0]
    for s in sources:
        if s.labels.shape != (n, len(s.schema)) or s.r.shape != s.labels.shape:
            raise ShapeError(f"{s.name}: labels and reliabilities must have shape ({n}, {len(s.schema)})")

    out = np.zeros((n, len(schema)), dtype=np.int8)
    choice = -np.ones((n, len(schema)), dtype=int)
    for k, name in enumerate(schema.names):
        holders = [i for i in order if name in sources[i].schema]
        if not holders:
            continue
        labels = np.stack([sources[i].labels[:, sources[i].schema.index(name)] for i in holders])
        score = np.full(labels.shape, -np.inf)
        for row, i in enumerate(holders):
            src = sources[i]
            nz = labels[row] != 0
            if nz.any():
                score[row, nz] = src.table.map_back(name, src.r[nz, src.schema.index(name)])
        best = np.argmax(score, axis=0)
        picked = labels[best, np.arange(n)]
        out[:, k] = picked
        choice[:, k] = np.where(picked != 0, np.asarray(holders)[best], -1)
    return (out, choice) if return_choice else out


def obtain_plausibility(labels, schema: AttributeSchema, strict: bool = False) -> np.ndarray:
    """Undefine annotations that claim two exclusive attributes at once.

    Wherever a sample has more than one positive attribute in a class, every
    attribute of that class is set to 0 for the sample. With ``strict`` the
    whole row of the sample is cleared instead.
    """
    labels = np.array(labels, dtype=np.int8, copy=True)
    if labels.ndim != 2 or labels.shape[1] != len(schema):
        raise ShapeError(f"labels must have shape (N, {len(schema)})")
    bad_rows = np.zeros(labels.shape[0], dtype=bool)
    for cols in schema.classes.values():
        if len(cols) < 2:
            continue
        cols = list(cols)
        bad = (labels[:, cols] == 1).sum(axis=1) > 1
        if strict:
            bad_rows |= bad
        else:
            labels[np.ix_(bad, cols)] = 0
    if strict:
        labels[bad_rows] = 0
    return labels
