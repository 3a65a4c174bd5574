"""Reliability of a prediction from repeated dropout-perturbed forward passes.

For the ``m`` probabilities ``x_1..x_m`` that the stochastic passes assign
to the predicted class::

    rel(x) = (1 - alpha) * mean(x) - alpha / m**2 * sum_ij |x_i - x_j|

The first term rewards confident passes, the second penalises disagreement
between them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class ReliabilityConfig:
    num_passes: int = 100
    alpha: float = 0.5

    def __post_init__(self):
        if self.num_passes < 2:
            raise ConfigError(f"num_passes must be >= 2, got {self.num_passes}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")


def pairwise_abs_sum(x, axis=-1):
    """``sum_i sum_j |x_i - x_j|`` along ``axis`` in O(m log m).

    With the values sorted ascending, element ``k`` (1-based) is larger
    than ``k - 1`` others and smaller than ``m - k``, so the double sum is
    ``2 * sum_k (2k - m - 1) * x_(k)``.
    """
    x = np.sort(np.asarray(x, dtype=np.float64), axis=axis)
    x = np.moveaxis(x, axis, -1)
    m = x.shape[-1]
    coef = 2.0 * np.arange(1, m + 1) - m - 1
    return 2.0 * (x @ coef)


def pairwise_abs_sum_naive(x):
    x = np.asarray(x, dtype=np.float64)
    return np.abs(x[..., :, None] - x[..., None, :]).sum(axis=(-2, -1))


def reliability(x, alpha: float = 0.5, axis=-1):
    """Reliability of each set of pass probabilities along ``axis``."""
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[axis]
    if m < 2:
        raise ConfigError(f"reliability needs at least 2 passes, got {m}")
    return (1.0 - alpha) * x.mean(axis=axis) - alpha / m**2 * pairwise_abs_sum(x, axis=axis)


def reliability_naive(x, alpha: float = 0.5):
    """Literal double-loop evaluation; reference for tests only."""
    m = len(x)
    if m < 2:
        raise ConfigError(f"reliability needs at least 2 passes, got {m}")
    centrality = (1.0 - alpha) / m * sum(x)
    dispersion = alpha / m**2 * sum(abs(xi - xj) for xi in x for xj in x)
    return centrality - dispersion
