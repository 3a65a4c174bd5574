"""Score files and metric reports."""

from __future__ import annotations

import json

import numpy as np

from .._io import atomic_write_text, fmt_float, read_csv, write_csv
from ..errors import ParseError
from .metrics import ClosedSetResult, OpenSetResult, ScoreSet, VerificationResult

SCORE_HEADER = ["ref_id", "probe_id", "is_genuine", "score"]


def save_scores(path, ref_ids, probe_ids, genuine, scores, meta=None):
    rows = (
        [r, p, "1" if g else "0", fmt_float(s)] for r, p, g, s in zip(ref_ids, probe_ids, genuine, scores)
    )
    write_csv(path, SCORE_HEADER, rows, meta)


def load_scores(path):
    """Return ``(ref_ids, probe_ids, is_genuine, scores)``."""
    header, rows = read_csv(path)
    if header != SCORE_HEADER:
        raise ParseError(path, 1, "header must be " + ",".join(SCORE_HEADER))
    refs, probes, gen, sc = [], [], [], []
    for line, row in rows:
        if len(row) != 4 or row[2] not in ("0", "1"):
            raise ParseError(path, line, "malformed score row")
        try:
            sc.append(float(row[3]))
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        refs.append(row[0])
        probes.append(row[1])
        gen.append(row[2] == "1")
    return refs, probes, np.array(gen, dtype=bool), np.array(sc, dtype=np.float64)


def scoreset_from(genuine_flags, scores) -> ScoreSet:
    genuine_flags = np.asarray(genuine_flags, dtype=bool)
    scores = np.asarray(scores)
    return ScoreSet(scores[genuine_flags], scores[~genuine_flags])


def write_verification(result: VerificationResult, roc_path, summary_path=None, meta=None, extra=None):
    rows = ([fmt_float(t), fmt_float(a), fmt_float(b)] for t, a, b in zip(result.thresholds, result.fmr, result.fnmr))
    write_csv(roc_path, ["threshold", "FMR", "FNMR"], rows, meta)
    if summary_path is not None:
        summary = dict(result.summary(), **(extra or {}))
        if meta:
            summary["meta"] = meta
        atomic_write_text(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_cmc(result: ClosedSetResult, path, meta=None):
    rows = ([str(k + 1), fmt_float(v)] for k, v in enumerate(result.cmc))
    write_csv(path, ["k", "CMC"], rows, meta)


def write_det(result: OpenSetResult, path, meta=None):
    rows = ([fmt_float(t), fmt_float(a), fmt_float(b)] for t, a, b in zip(result.thresholds, result.fpir, result.fnir))
    write_csv(path, ["threshold", "FPIR", "FNIR"], rows, meta)
