"""Binarisation of continuous source annotations.

Scores above an attribute's upper threshold become +1, scores below its
lower threshold -1, everything in between is left undefined. Thresholds can
be searched outward from zero against a correctness oracle that judges small
windows of samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ._io import fmt_float, read_csv, write_csv
from .errors import ConfigError, DataError, ParseError

Oracle = Callable[[str, str, int], bool]


@dataclass(frozen=True)
class ThresholdPair:
    lower: float
    upper: float
    usable: bool = True

    def __post_init__(self):
        if not self.lower <= 0.0 <= self.upper:
            raise ConfigError(f"thresholds must satisfy lower <= 0 <= upper, got ({self.lower}, {self.upper})")

    @classmethod
    def unusable(cls) -> "ThresholdPair":
        return cls(-math.inf, math.inf, usable=False)


def binarize(scores, thresholds: Mapping[str, ThresholdPair], names: Sequence[str]) -> np.ndarray:
    """Tri-state matrix from continuous scores; strict inequalities on both sides."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != len(names):
        raise DataError(f"scores must have one column per attribute ({len(names)}), got {scores.shape}")
    missing = [n for n in names if n not in thresholds]
    if missing:
        raise ConfigError(f"no thresholds for attributes {missing}")
    lower = np.array([thresholds[n].lower for n in names])
    upper = np.array([thresholds[n].upper for n in names])
    out = np.zeros(scores.shape, dtype=np.int8)
    out[scores > upper] = 1
    out[scores < lower] = -1
    return out


class ReferenceOracle:
    """Judges a polarity correct when it agrees with a reference annotation matrix."""

    def __init__(self, sample_ids: Sequence[str], names: Sequence[str], reference):
        self._row = {s: i for i, s in enumerate(sample_ids)}
        self._col = {n: k for k, n in enumerate(names)}
        self._ref = np.asarray(reference)

    def __call__(self, sample_id: str, attribute: str, polarity: int) -> bool:
        return bool(self._ref[self._row[sample_id], self._col[attribute]] == polarity)


def candidate_grid(magnitudes, step: float = 0.02) -> np.ndarray:
    """Zero followed by the magnitude quantiles at ``step`` increments (below 1)."""
    qs = np.arange(1, int(round(1.0 / step))) * step
    grid = np.concatenate([[0.0], np.quantile(magnitudes, qs)])
    return np.unique(grid)


def _search_side(magnitudes, ids, attribute, polarity, oracle, window, required_correct, step):
    order = np.argsort(magnitudes, kind="stable")
    mags = magnitudes[order]
    ids = [ids[i] for i in order]
    verdicts: dict[int, bool] = {}
    for cand in candidate_grid(mags, step):
        near = np.argsort(np.abs(mags - cand), kind="stable")[:window]
        hits = 0
        for j in near:
            if j not in verdicts:
                verdicts[j] = bool(oracle(ids[j], attribute, polarity))
            hits += verdicts[j]
        if hits >= required_correct:
            return float(cand)
    return None


def search_thresholds(
    scores,
    sample_ids: Sequence[str],
    attribute: str,
    oracle: Oracle,
    window: int = 10,
    required_correct: int = 9,
    step: float = 0.02,
) -> ThresholdPair:
    """Move candidate thresholds outward from zero until a window passes the oracle.

    Each side of zero is searched on its own. At a candidate the ``window``
    samples of that side whose scores lie closest to it are judged; the
    first candidate with at least ``required_correct`` correct judgments is
    kept. If either side never passes, the attribute is unusable.
    """
    if not 1 <= required_correct <= window:
        raise ConfigError("need 1 <= required_correct <= window")
    if not 0.0 < step < 1.0:
        raise ConfigError("step must lie in (0, 1)")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(sample_ids),):
        raise DataError("scores and sample_ids differ in length")
    found = {}
    for polarity in (1, -1):
        side = np.flatnonzero(scores * polarity > 0)
        if side.size < window:
            raise DataError(
                f"{attribute}: only {side.size} samples with polarity {polarity:+d}, need at least {window}"
            )
        mags = np.abs(scores[side])
        ids = [sample_ids[i] for i in side]
        found[polarity] = _search_side(mags, ids, attribute, polarity, oracle, window, required_correct, step)
    if found[1] is None or found[-1] is None:
        return ThresholdPair.unusable()
    return ThresholdPair(lower=-found[-1], upper=found[1])


def save_thresholds(thresholds: Mapping[str, ThresholdPair], path, meta=None):
    rows = ([name, fmt_float(t.lower), fmt_float(t.upper)] for name, t in thresholds.items())
    write_csv(path, ["attribute", "lower", "upper"], rows, meta)


def load_thresholds(path) -> dict[str, ThresholdPair]:
    header, rows = read_csv(path)
    if header != ["attribute", "lower", "upper"]:
        raise ParseError(path, 1, "header must be attribute,lower,upper")
    out = {}
    for line, row in rows:
        if len(row) != 3:
            raise ParseError(path, line, f"expected 3 fields, got {len(row)}")
        try:
            lo, hi = float(row[1]), float(row[2])
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        usable = math.isfinite(lo) and math.isfinite(hi)
        out[row[0]] = ThresholdPair(lo, hi, usable) if usable else ThresholdPair.unusable()
    return out
