"""Deterministic predictions and dropout-based reliability estimates."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .network import DETERMINISTIC, STOCHASTIC, MacModel, forward
from .reliability import ReliabilityConfig, reliability

CHUNK = 256


def _require_binary(model: MacModel):
    bad = [a.name for a in model.schema if a.num_classes != 2]
    if bad:
        raise ConfigError(f"tri-state predictions need binary attributes; non-binary: {bad}")


def probs_to_labels(probs) -> np.ndarray:
    """+1 where P(true) > P(false), else -1; exact ties go to -1."""
    probs = np.asarray(probs)
    return np.where(probs[..., 0] > probs[..., 1], 1, -1).astype(np.int8)


def predict(model: MacModel, embeddings) -> np.ndarray:
    """(N, K) matrix over {+1, -1} from a deterministic pass."""
    _require_binary(model)
    probs = forward(model, embeddings, DETERMINISTIC)
    return np.stack([probs_to_labels(p) for p in probs], axis=1)


@dataclass
class StochasticOutputs:
    """Softmax rows of ``m`` stochastic passes.

    ``probs[k]`` has shape (N, m, C_k). ``predicted[:, k]`` is the class
    index whose pass probabilities feed the reliability measure and
    ``x[k]`` (N, m) holds those probabilities.
    """

    probs: list[np.ndarray]
    predicted: np.ndarray

    @property
    def x(self) -> list[np.ndarray]:
        idx = np.arange(self.predicted.shape[0])
        return [p[idx, :, self.predicted[:, k]] for k, p in enumerate(self.probs)]

    def reliability(self, config: ReliabilityConfig = ReliabilityConfig()) -> np.ndarray:
        return np.stack([reliability(xk, config.alpha, axis=1) for xk in self.x], axis=1)


def _mean_argmax(mean_row):
    # ties resolve to the highest index, i.e. "false" for binary branches
    c = mean_row.shape[-1]
    return c - 1 - np.argmax(mean_row[..., ::-1], axis=-1)


def stochastic_passes(model: MacModel, embeddings, num_passes: int, rng, predicted=None) -> StochasticOutputs:
    """Run ``num_passes`` dropout-active passes over all samples.

    Without ``predicted`` the class per attribute is the argmax of the mean
    row. Pass ``predicted`` (class indices, (N, K)) to score another
    prediction, e.g. the deterministic one.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    runs = [forward(model, x, STOCHASTIC, rng) for _ in range(num_passes)]
    probs = [np.stack([r[k] for r in runs], axis=1) for k in range(len(model.schema))]
    if predicted is None:
        predicted = np.stack([_mean_argmax(p.mean(axis=1)) for p in probs], axis=1)
    return StochasticOutputs(probs, np.asarray(predicted, dtype=int))


def predict_with_reliability(
    model: MacModel,
    embeddings,
    config: ReliabilityConfig = ReliabilityConfig(),
    seed: int = 0,
    workers: int = 1,
    chunk: int = CHUNK,
):
    """Deterministic predictions ``p`` and their reliabilities ``r``, both (N, K).

    Reliability is measured for the deterministically predicted class. Work
    is split into fixed chunks, each with its own child seed, so results do
    not depend on ``workers``.
    """
    _require_binary(model)
    x = np.asarray(embeddings, dtype=np.float64)
    p = predict(model, x)
    cls = np.where(p == 1, 0, 1)
    starts = list(range(0, x.shape[0], chunk))

    def run(i):
        sl = slice(starts[i], starts[i] + chunk)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        out = stochastic_passes(model, x[sl], config.num_passes, rng, predicted=cls[sl])
        return out.reliability(config)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(starts))))
    else:
        parts = [run(i) for i in range(len(starts))]
    r = np.concatenate(parts, axis=0) if parts else np.zeros(p.shape)
    return p, r
