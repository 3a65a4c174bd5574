"""Adam training of the attribute classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .network import BN_MOMENTUM, TRAIN, MacModel, loss_and_grads

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    lr_decay: float | None = None  # defaults to learning_rate / epochs
    lr_floor: float = 0.1  # fraction of learning_rate
    batch_size: int = 1024
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @property
    def decay(self) -> float:
        return self.learning_rate / self.epochs if self.lr_decay is None else self.lr_decay

    def rate_at(self, epoch: int) -> float:
        """Learning rate for 0-based ``epoch``: linear decay, floored."""
        return max(self.learning_rate - self.decay * epoch, self.lr_floor * self.learning_rate)


class Adam:
    """Adam with bias-corrected moments; the step size may change per call."""

    def __init__(self, params: dict, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainingLog:
    epoch_losses: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def train(model: MacModel, embeddings, annotations, config: TrainingConfig) -> tuple[MacModel, TrainingLog]:
    """Train a copy of ``model`` and return it with the per-epoch loss log.

    Attributes without a single defined label are skipped and listed in
    ``log.skipped``. Batches of one sample are dropped since batch-norm
    statistics are meaningless for them.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(annotations)
    model = model.copy()
    names = model.schema.names
    defined = (y != 0).any(axis=0)
    out = TrainingLog(skipped=[n for n, d in zip(names, defined) if not d])
    for n in out.skipped:
        log.warning("attribute %s has no defined training labels; branch skipped", n)
    model.skipped = tuple(out.skipped)

    rng = np.random.default_rng(config.seed)
    opt = Adam(model.params, config.beta1, config.beta2, config.eps)
    n = x.shape[0]
    momentum = BN_MOMENTUM
    bn_keys = ["trunk"] + [k[: -len(".mean")] for k in model.buffers if k.endswith(".mean") and k != "trunk.mean"]
    for epoch in range(config.epochs):
        lr = config.rate_at(epoch)
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            if batch.size < 2:
                continue
            loss, grads, cache = loss_and_grads(model, x[batch], y[batch], TRAIN, rng, active=defined)
            opt.step(model.params, grads, lr)
            _update_running_stats(model, cache, bn_keys, momentum)
            losses.append(loss)
        out.epoch_losses.append(float(np.mean(losses)) if losses else float("nan"))
        out.learning_rates.append(lr)
    return model, out


def _update_running_stats(model, cache, bn_keys, momentum):
    stats = [cache["tcache"]] + [bc for _, bc in cache["branches"]]
    for key, c in zip(bn_keys, stats):
        mean, var = c[4], c[5]
        model.buffers[f"{key}.mean"] = momentum * model.buffers[f"{key}.mean"] + (1 - momentum) * mean
        model.buffers[f"{key}.var"] = momentum * model.buffers[f"{key}.var"] + (1 - momentum) * var
