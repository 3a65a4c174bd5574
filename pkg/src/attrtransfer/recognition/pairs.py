"""Comparison pairs between annotated samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import StageError
from .features import overlap_count

MIN_OVERLAP = 10


@dataclass(frozen=True)
class ComparisonPair:
    ref_sample_id: str
    probe_sample_id: str
    overlap_count: int
    is_genuine: bool


@dataclass
class PairSet:
    """Index-based pairs into one annotation matrix."""

    ref: np.ndarray
    probe: np.ndarray
    overlap: np.ndarray
    genuine: np.ndarray

    def __len__(self):
        return len(self.ref)

    def subset(self, mask) -> "PairSet":
        return PairSet(self.ref[mask], self.probe[mask], self.overlap[mask], self.genuine[mask])

    def as_pairs(self, sample_ids: Sequence[str]) -> list[ComparisonPair]:
        return [
            ComparisonPair(sample_ids[r], sample_ids[p], int(o), bool(g))
            for r, p, o, g in zip(self.ref, self.probe, self.overlap, self.genuine)
        ]


def make_pairs(annotations, subject_ids, ref, probe) -> PairSet:
    annotations = np.asarray(annotations)
    subj = np.asarray(subject_ids)
    ref = np.asarray(ref, dtype=int)
    probe = np.asarray(probe, dtype=int)
    return PairSet(ref, probe, overlap_count(annotations[ref], annotations[probe]), subj[ref] == subj[probe])


def all_pairs(annotations, subject_ids) -> PairSet:
    """Every unordered pair of distinct samples."""
    i, j = np.triu_indices(len(subject_ids), k=1)
    return make_pairs(annotations, subject_ids, i, j)


def valid_filter(pairs, min_overlap: int = MIN_OVERLAP):
    """Drop comparisons with fewer than ``min_overlap`` jointly annotated attributes."""
    if isinstance(pairs, PairSet):
        return pairs.subset(pairs.overlap >= min_overlap)
    return [p for p in pairs if p.overlap_count >= min_overlap]


@dataclass(frozen=True)
class PairSamplingConfig:
    max_genuine_per_subject: int = 50
    imposter_ratio: float = 1.0
    min_overlap: int = MIN_OVERLAP
    max_attempts: int = 50


def sample_training_pairs(annotations, subject_ids, config: PairSamplingConfig, seed: int = 0) -> PairSet:
    """Valid genuine pairs (capped per subject) plus randomly drawn valid imposter pairs."""
    rng = np.random.default_rng(seed)
    annotations = np.asarray(annotations)
    subj = np.asarray(subject_ids)
    by_subject: dict[str, list[int]] = {}
    for i, s in enumerate(subj):
        by_subject.setdefault(s, []).append(i)
    refs, probes = [], []
    for s in sorted(by_subject):
        idx = by_subject[s]
        if len(idx) < 2:
            continue
        a, b = np.triu_indices(len(idx), k=1)
        cand = make_pairs(annotations, subj, np.asarray(idx)[a], np.asarray(idx)[b])
        cand = valid_filter(cand, config.min_overlap)
        if len(cand) > config.max_genuine_per_subject:
            keep = np.sort(rng.choice(len(cand), config.max_genuine_per_subject, replace=False))
            cand = cand.subset(keep)
        refs.append(cand.ref)
        probes.append(cand.probe)
    if not refs or sum(len(r) for r in refs) == 0:
        raise StageError("no valid genuine pairs in the training data")
    gen_ref, gen_probe = np.concatenate(refs), np.concatenate(probes)
    want = int(round(config.imposter_ratio * len(gen_ref)))
    imp_ref, imp_probe = [], []
    n = len(subj)
    got = 0
    for _ in range(config.max_attempts):
        if got >= want:
            break
        a = rng.integers(0, n, size=2 * (want - got) + 16)
        b = rng.integers(0, n, size=a.size)
        cand = make_pairs(annotations, subj, a, b)
        ok = ~cand.genuine & (cand.overlap >= config.min_overlap)
        take = np.flatnonzero(ok)[: want - got]
        imp_ref.append(a[take])
        imp_probe.append(b[take])
        got += take.size
    ref = np.concatenate([gen_ref, *imp_ref])
    probe = np.concatenate([gen_probe, *imp_probe])
    return make_pairs(annotations, subj, ref, probe)

