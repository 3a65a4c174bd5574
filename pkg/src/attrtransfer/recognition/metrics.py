"""Verification and identification metrics computed by sorted threshold sweeps.

A comparison is accepted at threshold ``t`` when its score is ``>= t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DataError, StageError

DEFAULT_FMR_TARGETS = (1e-3, 1e-2, 1e-1)


@dataclass
class ScoreSet:
    genuine: np.ndarray
    imposter: np.ndarray

    def __post_init__(self):
        self.genuine = np.asarray(self.genuine, dtype=np.float64).ravel()
        self.imposter = np.asarray(self.imposter, dtype=np.float64).ravel()


@dataclass
class VerificationResult:
    thresholds: np.ndarray
    fmr: np.ndarray
    fnmr: np.ndarray
    auc: float
    eer: float
    fnmr_at_fmr: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "auc": self.auc,
            "eer": self.eer,
            "fnmr_at_fmr": {repr(float(k)): v for k, v in self.fnmr_at_fmr.items()},
        }


def error_rates(genuine, imposter, thresholds):
    """FMR (imposters >= t) and FNMR (genuines < t) at each threshold."""
    g = np.sort(np.asarray(genuine, dtype=np.float64))
    i = np.sort(np.asarray(imposter, dtype=np.float64))
    fmr = (i.size - np.searchsorted(i, thresholds, side="left")) / i.size
    fnmr = np.searchsorted(g, thresholds, side="left") / g.size
    return fmr, fnmr


def equal_error_rate(fmr, fnmr) -> float:
    """EER from rates ordered by increasing threshold, interpolating linearly at the crossing."""
    d = np.asarray(fmr) - np.asarray(fnmr)
    j = int(np.argmax(d <= 0))
    if d[j] == 0 or j == 0:
        return float(fmr[j]) if d[j] == 0 else float((fmr[j] + fnmr[j]) / 2)
    t = d[j - 1] / (d[j - 1] - d[j])
    return float(fmr[j - 1] + t * (fmr[j] - fmr[j - 1]))


def eval_verification(scores: ScoreSet, fmr_targets: Sequence[float] = DEFAULT_FMR_TARGETS) -> VerificationResult:
    """ROC sweep, AUC (trapezoid), EER and FNMR at fixed FMR targets.

    FNMR@FMR uses the lowest threshold whose FMR does not exceed the target.
    """
    if scores.genuine.size == 0 or scores.imposter.size == 0:
        raise DataError("verification needs genuine and imposter scores")
    thr = np.concatenate([np.unique(np.concatenate([scores.genuine, scores.imposter])), [np.inf]])
    fmr, fnmr = error_rates(scores.genuine, scores.imposter, thr)
    tpr = 1.0 - fnmr
    # thresholds ascend, so FMR descends; integrate from the (0, 0) end
    auc = float(np.sum((fmr[:-1] - fmr[1:]) * (tpr[:-1] + tpr[1:]) / 2.0))
    at = {}
    for target in fmr_targets:
        j = int(np.argmax(fmr <= target))
        at[float(target)] = float(fnmr[j])
    return VerificationResult(thr, fmr, fnmr, auc, equal_error_rate(fmr, fnmr), at)


# ---------------------------------------------------------------------------
# identification


def select_gallery(annotations, subject_ids, sample_ids):
    """One reference per identity: the sample with most defined annotations.

    Ties go to the lexicographically smallest sample id. Returns
    ``(gallery_indices, probe_indices)``, the gallery ordered by subject id.
    """
    defined = (np.asarray(annotations) != 0).sum(axis=1)
    best: dict[str, int] = {}
    for i, s in enumerate(subject_ids):
        j = best.get(s)
        if j is None or (defined[i], sample_ids[j]) > (defined[j], sample_ids[i]):
            best[s] = i
    gallery = np.array([best[s] for s in sorted(best)], dtype=int)
    chosen = set(gallery.tolist())
    probes = np.array([i for i in range(len(subject_ids)) if i not in chosen], dtype=int)
    return gallery, probes


def score_matrix(comparator, probe_ann, gallery_ann, min_overlap: int, chunk: int = 256):
    """(P, G) scores with invalid comparisons set to -inf."""
    probe_ann = np.asarray(probe_ann)
    gallery_ann = np.asarray(gallery_ann)
    P, G = len(probe_ann), len(gallery_ann)
    out = np.empty((P, G))
    for s in range(0, P, chunk):
        block = probe_ann[s : s + chunk]
        ref = np.repeat(gallery_ann[None], len(block), axis=0).reshape(-1, gallery_ann.shape[1])
        prb = np.repeat(block, G, axis=0)
        sc = np.asarray(comparator.score_pairs(ref, prb), dtype=np.float64)
        ov = ((ref != 0) & (prb != 0)).sum(axis=1)
        out[s : s + chunk] = np.where(ov >= min_overlap, sc, -np.inf).reshape(len(block), G)
    return out


def mated_ranks(scores, mated_col):
    """Rank of the mated reference per probe row; ties count against the probe."""
    rows = np.arange(scores.shape[0])
    mated = scores[rows, mated_col]
    higher_or_tied = (scores >= mated[:, None]).sum(axis=1)
    return higher_or_tied, mated


@dataclass
class ClosedSetResult:
    ranks: np.ndarray
    cmc: np.ndarray  # cmc[k-1] = fraction of probes with rank <= k
    n_probes: int
    n_excluded: int


def eval_closed_set(annotations, subject_ids, sample_ids, comparator, min_overlap: int = 10, gallery=None):
    """Closed-set identification: CMC over probes against a one-per-identity gallery.

    Probes without any valid gallery comparison are left out and counted in
    ``n_excluded``.
    """
    annotations = np.asarray(annotations)
    subj = np.asarray(subject_ids)
    if gallery is None:
        gallery, probes = select_gallery(annotations, subject_ids, sample_ids)
    else:
        gallery = np.asarray(gallery, dtype=int)
        probes = np.setdiff1d(np.arange(len(subj)), gallery)
    if gallery.size == 0:
        raise StageError("empty gallery")
    gal_subj = subj[gallery]
    col = {s: k for k, s in enumerate(gal_subj)}
    probes = np.array([p for p in probes if subj[p] in col], dtype=int)
    S = score_matrix(comparator, annotations[probes], annotations[gallery], min_overlap)
    usable = np.isfinite(S).any(axis=1)
    S = S[usable]
    mated_col = np.array([col[s] for s in subj[probes[usable]]], dtype=int)
    ranks, _ = mated_ranks(S, mated_col)
    G = gallery.size
    cmc = (ranks[:, None] <= np.arange(1, G + 1)[None]).mean(axis=0) if ranks.size else np.zeros(G)
    return ClosedSetResult(ranks, cmc, int(usable.sum()), int((~usable).sum()))


@dataclass
class OpenSetResult:
    thresholds: np.ndarray
    fpir: np.ndarray
    fnir: np.ndarray
    n_enrolled: int
    n_unenrolled: int
    n_excluded: int


def open_set_rates(mated, rank1, unenrolled_max, thresholds):
    """FPIR and FNIR at each threshold from per-probe summaries."""
    u = np.sort(np.asarray(unenrolled_max, dtype=np.float64))
    fpir = (u.size - np.searchsorted(u, thresholds, side="left")) / u.size
    miss_always = ~np.asarray(rank1, dtype=bool)
    m = np.sort(np.asarray(mated, dtype=np.float64)[~miss_always])
    fnir = (miss_always.sum() + np.searchsorted(m, thresholds, side="left")) / len(rank1)
    return fpir, fnir


def eval_open_set(
    gallery_ann,
    gallery_subjects,
    enrolled_ann,
    enrolled_subjects,
    unenrolled_ann,
    comparator,
    min_overlap: int = 10,
) -> OpenSetResult:
    """DET points (FPIR vs FNIR) swept over the observed scores.

    An enrolled probe is missed at threshold ``t`` if its mated score is
    below ``t`` or the mated reference is not strictly ranked first. An
    unenrolled probe raises a false alarm if its best gallery score reaches
    ``t``. Probes without any valid comparison are excluded.
    """
    if len(unenrolled_ann) == 0:
        raise DataError("open-set evaluation needs unenrolled probes")
    if len(enrolled_ann) == 0:
        raise DataError("open-set evaluation needs enrolled probes")
    gal_subj = np.asarray(gallery_subjects)
    col = {s: k for k, s in enumerate(gal_subj)}
    missing = sorted({s for s in enrolled_subjects if s not in col})
    if missing:
        raise DataError(f"enrolled probes of identities absent from the gallery: {missing[:5]}")
    Se = score_matrix(comparator, enrolled_ann, gallery_ann, min_overlap)
    Su = score_matrix(comparator, unenrolled_ann, gallery_ann, min_overlap)
    ok_e = np.isfinite(Se).any(axis=1)
    ok_u = np.isfinite(Su).any(axis=1)
    if not ok_e.any() or not ok_u.any():
        raise StageError("no valid comparisons for open-set evaluation")
    Se = Se[ok_e]
    mated_col = np.array([col[s] for s in np.asarray(enrolled_subjects)[ok_e]], dtype=int)
    ranks, mated = mated_ranks(Se, mated_col)
    umax = Su[ok_u].max(axis=1)
    pool = np.concatenate([mated[np.isfinite(mated)], umax])
    thr = np.concatenate([np.unique(pool), [np.inf]])
    fpir, fnir = open_set_rates(mated, ranks == 1, umax, thr)
    return OpenSetResult(thr, fpir, fnir, int(ok_e.sum()), int(ok_u.sum()), int((~ok_e).sum() + (~ok_u).sum()))


def split_open_set(subjects, unenrolled_fraction: float = 0.2, seed: int = 0):
    """Partition identities into enrolled and unenrolled sets."""
    subjects = sorted(set(subjects))
    if len(subjects) < 2:
        raise DataError("open-set split needs at least two identities")
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_out = min(max(int(round(unenrolled_fraction * len(subjects))), 1), len(subjects) - 1)
    out = {subjects[i] for i in order[:n_out]}
    return [s for s in subjects if s not in out], sorted(out)


def verification_scores(comparator, annotations, pairs):
    """Scores of ``pairs`` (a ``PairSet``) split into a ``ScoreSet``."""
    annotations = np.asarray(annotations)
    s = np.asarray(comparator.score_pairs(annotations[pairs.ref], annotations[pairs.probe]), dtype=np.float64)
    return ScoreSet(s[pairs.genuine], s[~pairs.genuine]), s
