"""Pairwise soft-biometric comparison features.

For each attribute three binary slots encode the relation of a reference and
a probe annotation: both true, both false, or both defined but different.
An undefined value on either side leaves all three slots at zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

TRUE_TRUE, FALSE_FALSE, DIFFER = 0, 1, 2
SLOT_NAMES = ("True-True", "False-False", "True-False")


def _pair(ref, probe):
    ref = np.asarray(ref)
    probe = np.asarray(probe)
    if ref.shape != probe.shape:
        raise ShapeError(f"reference and probe annotations differ in shape: {ref.shape} vs {probe.shape}")
    return ref, probe


def joint_features(ref, probe) -> np.ndarray:
    """Joint feature of length 3K (or (N, 3K) for batches of rows)."""
    ref, probe = _pair(ref, probe)
    both = (ref != 0) & (probe != 0)
    slots = np.stack(
        [(ref == 1) & (probe == 1), (ref == -1) & (probe == -1), both & (ref != probe)], axis=-1
    ).astype(np.int8)
    return slots.reshape(*ref.shape[:-1], 3 * ref.shape[-1])


def overlap_count(ref, probe) -> np.ndarray:
    """Number of attributes defined in both rows."""
    ref, probe = _pair(ref, probe)
    return ((ref != 0) & (probe != 0)).sum(axis=-1)


def hamming_score(features, n_attributes: int, literal: bool = False):
    """``1 - NHD`` for joint features.

    By default NHD counts only the disagreement slots, divided by the number
    of attributes. ``literal=True`` counts every set slot instead; for fully
    annotated pairs that makes the score 0 regardless of agreement.
    """
    f = np.asarray(features)
    if f.shape[-1] != 3 * n_attributes:
        raise ShapeError(f"joint feature length {f.shape[-1]} does not match {n_attributes} attributes")
    if literal:
        ones = f.sum(axis=-1)
    else:
        ones = f.reshape(*f.shape[:-1], n_attributes, 3)[..., DIFFER].sum(axis=-1)
    return 1.0 - ones / n_attributes
