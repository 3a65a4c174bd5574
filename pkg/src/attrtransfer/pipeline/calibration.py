"""Per-attribute reliability thresholds and the reliability-to-accuracy mapping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .._io import fmt_float, read_csv, write_csv
from ..errors import ConfigError, LookupFailure, ParseError, ShapeError

RETAINED = "RETAINED"
DISCARDED = "DISCARDED"
# absorbs rounding in the balanced-accuracy comparison
ACC_TOL = 1e-12


@dataclass(frozen=True)
class CalibrationConfig:
    acc_min: float = 0.90
    d_min: float = 0.50

    def __post_init__(self):
        for label, v in (("acc_min", self.acc_min), ("d_min", self.d_min)):
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{label} must lie in (0, 1], got {v}")


@dataclass
class AttributeCalibration:
    attribute: str
    status: str
    threshold: float | None = None
    coverage: float = math.nan
    balanced_accuracy: float = math.nan
    reason: str = ""
    support: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail_accuracy: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def retained(self) -> bool:
        return self.status == RETAINED


class CalibrationTable:
    """Thresholds and tail-accuracy step functions for one source's attributes."""

    def __init__(self, entries: Sequence[AttributeCalibration]):
        self.entries = {e.attribute: e for e in entries}

    @property
    def attributes(self) -> list[str]:
        return list(self.entries)

    def __getitem__(self, attribute) -> AttributeCalibration:
        try:
            return self.entries[attribute]
        except KeyError:
            raise LookupFailure(f"attribute {attribute!r} not calibrated") from None

    def threshold(self, attribute) -> float | None:
        return self[attribute].threshold

    def map_back(self, attribute: str, r):
        """Expected balanced accuracy of predictions with reliability >= ``r``.

        ``r`` outside the observed support is clamped to the nearest end.
        """
        e = self[attribute]
        if not e.retained:
            raise LookupFailure(f"attribute {attribute!r} was discarded: {e.reason}")
        r = np.asarray(r, dtype=np.float64)
        idx = np.clip(np.searchsorted(e.support, r, side="left"), 0, len(e.support) - 1)
        out = e.tail_accuracy[idx]
        return float(out) if out.ndim == 0 else out


def _balanced(correct_pos, n_pos, correct_neg, n_neg):
    """Mean recall over the classes present; arrays broadcast."""
    with np.errstate(invalid="ignore", divide="ignore"):
        rp = np.where(n_pos > 0, correct_pos / np.maximum(n_pos, 1), 0.0)
        rn = np.where(n_neg > 0, correct_neg / np.maximum(n_neg, 1), 0.0)
    present = (n_pos > 0).astype(float) + (n_neg > 0).astype(float)
    return np.where(present > 0, (rp + rn) / np.maximum(present, 1), np.nan)


def balanced_accuracy(predictions, truth) -> float:
    """Balanced accuracy over cells where ``truth`` is defined."""
    predictions = np.asarray(predictions).ravel()
    truth = np.asarray(truth).ravel()
    pos, neg = truth == 1, truth == -1
    return float(
        _balanced((predictions[pos] == 1).sum(), pos.sum(), (predictions[neg] == -1).sum(), neg.sum())
    )


def tail_accuracy(predictions, reliabilities, truth):
    """Support points (unique reliabilities, ascending) and the tail balanced accuracy at each.

    Only samples with defined truth take part.
    """
    p = np.asarray(predictions).ravel()
    r = np.asarray(reliabilities, dtype=np.float64).ravel()
    t = np.asarray(truth).ravel()
    keep = t != 0
    p, r, t = p[keep], r[keep], t[keep]
    order = np.argsort(r, kind="stable")
    r, p, t = r[order], p[order], t[order]
    support = np.unique(r)

    def suffix(v):
        return np.concatenate([np.cumsum(v[::-1])[::-1], [0]])

    pos, neg = t == 1, t == -1
    n_pos, n_neg = suffix(pos.astype(int)), suffix(neg.astype(int))
    c_pos, c_neg = suffix((pos & (p == 1)).astype(int)), suffix((neg & (p == -1)).astype(int))
    start = np.searchsorted(r, support, side="left")
    acc = _balanced(c_pos[start], n_pos[start], c_neg[start], n_neg[start])
    return support, acc


def calibrate_attribute(
    attribute: str, predictions, reliabilities, truth, target_reliabilities, config: CalibrationConfig
) -> AttributeCalibration:
    truth = np.asarray(truth).ravel()
    n_pos, n_neg = int((truth == 1).sum()), int((truth == -1).sum())
    if n_pos < 2 or n_neg < 2:
        return AttributeCalibration(
            attribute, DISCARDED, reason=f"too few defined test labels (positive {n_pos}, negative {n_neg})"
        )
    support, acc = tail_accuracy(predictions, reliabilities, truth)
    target = np.sort(np.asarray(target_reliabilities, dtype=np.float64).ravel())
    if target.size == 0:
        return AttributeCalibration(attribute, DISCARDED, reason="no target samples", support=support, tail_accuracy=acc)
    # count / size, not 1 - fraction: the latter can land one ulp below d_min
    coverage = (target.size - np.searchsorted(target, support, side="left")) / target.size
    ok = (acc >= config.acc_min - ACC_TOL) & (coverage >= config.d_min)
    if not ok.any():
        best = float(np.nanmax(acc[coverage >= config.d_min])) if (coverage >= config.d_min).any() else math.nan
        return AttributeCalibration(
            attribute,
            DISCARDED,
            reason=f"no threshold reaches balanced accuracy {config.acc_min} with coverage >= {config.d_min}"
            f" (best feasible {best:.4f})",
            support=support,
            tail_accuracy=acc,
        )
    k = int(np.argmax(ok))
    return AttributeCalibration(
        attribute,
        RETAINED,
        threshold=float(support[k]),
        coverage=float(coverage[k]),
        balanced_accuracy=float(acc[k]),
        support=support,
        tail_accuracy=acc,
    )


def calibrate(
    test_predictions,
    test_reliabilities,
    test_truth,
    target_reliabilities,
    attributes: Sequence[str],
    config: CalibrationConfig = CalibrationConfig(),
) -> CalibrationTable:
    """Pick, per attribute, the smallest reliability threshold meeting both constraints.

    A threshold is feasible when the balanced accuracy of test predictions at
    or above it reaches ``acc_min`` and at least ``d_min`` of the target
    samples reach it. Attributes without a feasible threshold are discarded.
    """
    tp = np.asarray(test_predictions)
    tr = np.asarray(test_reliabilities)
    tt = np.asarray(test_truth)
    gr = np.asarray(target_reliabilities)
    k = len(attributes)
    if not (tp.shape == tr.shape == tt.shape) or tp.ndim != 2 or tp.shape[1] != k:
        raise ShapeError("test predictions, reliabilities and truth must share shape (N, K)")
    if gr.ndim != 2 or gr.shape[1] != k:
        raise ShapeError("target reliabilities must have shape (M, K)")
    return CalibrationTable(
        calibrate_attribute(a, tp[:, j], tr[:, j], tt[:, j], gr[:, j], config) for j, a in enumerate(attributes)
    )


def save_calibration(table: CalibrationTable, path, support_path=None, meta=None):
    rows = []
    for e in table.entries.values():
        rows.append(
            [
                e.attribute,
                fmt_float(e.threshold) if e.retained else "",
                fmt_float(e.coverage) if e.retained else "",
                fmt_float(e.balanced_accuracy) if e.retained else "",
                e.status,
            ]
        )
    write_csv(path, ["attribute", "threshold", "coverage", "balanced_accuracy", "status"], rows, meta)
    if support_path is not None:
        srows = (
            [e.attribute, fmt_float(s), fmt_float(a)]
            for e in table.entries.values()
            for s, a in zip(e.support, e.tail_accuracy)
        )
        write_csv(support_path, ["attribute", "reliability", "balanced_accuracy"], srows, meta)


def load_calibration(path, support_path) -> CalibrationTable:
    header, rows = read_csv(path)
    if header != ["attribute", "threshold", "coverage", "balanced_accuracy", "status"]:
        raise ParseError(path, 1, "unexpected calibration header")
    support: dict[str, tuple[list, list]] = {}
    sheader, srows = read_csv(support_path)
    if sheader != ["attribute", "reliability", "balanced_accuracy"]:
        raise ParseError(support_path, 1, "unexpected support header")
    for line, row in srows:
        if len(row) != 3:
            raise ParseError(support_path, line, "expected 3 fields")
        s, a = support.setdefault(row[0], ([], []))
        s.append(float(row[1]))
        a.append(float(row[2]))
    entries = []
    for line, row in rows:
        if len(row) != 5 or row[4] not in (RETAINED, DISCARDED):
            raise ParseError(path, line, "malformed calibration row")
        s, a = support.get(row[0], ([], []))
        kw = dict(support=np.array(s), tail_accuracy=np.array(a))
        if row[4] == RETAINED:
            entries.append(
                AttributeCalibration(row[0], RETAINED, float(row[1]), float(row[2]), float(row[3]), **kw)
            )
        else:
            entries.append(AttributeCalibration(row[0], DISCARDED, reason="discarded at calibration", **kw))
    return CalibrationTable(entries)
