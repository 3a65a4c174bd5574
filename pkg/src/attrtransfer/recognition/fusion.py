"""EER-weighted score-level fusion of two comparison systems."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ConfigError, ShapeError
from .metrics import ScoreSet, eval_verification

COMPLEMENT = "complement"  # w_i proportional to 1 - EER_i
INVERSE = "inverse"  # w_i proportional to 1 / EER_i


def fusion_weights(eers: Sequence[float], mode: str = COMPLEMENT) -> np.ndarray:
    eers = np.asarray(eers, dtype=np.float64)
    if ((eers < 0) | (eers > 1)).any():
        raise ConfigError(f"EERs must lie in [0, 1], got {eers}")
    if mode == COMPLEMENT:
        raw = 1.0 - eers
        if raw.sum() == 0:
            raw = np.ones_like(eers)
    elif mode == INVERSE:
        # perfect systems share all the weight
        raw = (eers == 0).astype(float) if (eers == 0).any() else 1.0 / eers
    else:
        raise ConfigError(f"unknown fusion mode {mode!r}")
    return raw / raw.sum()


def minmax(scores: ScoreSet) -> ScoreSet:
    allv = np.concatenate([scores.genuine, scores.imposter])
    finite = allv[np.isfinite(allv)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    return ScoreSet((scores.genuine - lo) / span, (scores.imposter - lo) / span)


def fuse_scores(primary: ScoreSet, secondary: ScoreSet, eers=None, mode: str = COMPLEMENT):
    """Weighted sum of min-max normalised scores, aligned pair by pair.

    ``eers`` defaults to each system's own EER on the given scores. Returns
    the fused ``ScoreSet`` and the weights used.
    """
    if primary.genuine.shape != secondary.genuine.shape or primary.imposter.shape != secondary.imposter.shape:
        raise ShapeError("score sets are not aligned pair by pair")
    if eers is None:
        eers = [eval_verification(primary, ()).eer, eval_verification(secondary, ()).eer]
    w = fusion_weights(eers, mode)
    a, b = minmax(primary), minmax(secondary)
    fused = ScoreSet(w[0] * a.genuine + w[1] * b.genuine, w[0] * a.imposter + w[1] * b.imposter)
    return fused, w
