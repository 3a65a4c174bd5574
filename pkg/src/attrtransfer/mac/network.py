"""Shared-trunk, multi-branch attribute classifier implemented in numpy.

Layout per forward pass::

    x -> Dense(D, T) -> BN -> ReLU -> Dropout            (trunk)
      -> for each attribute a:
           Dense(T, B) -> BN -> ReLU -> Dropout -> Dense(B, C_a) -> softmax

Dense layers feeding a batch-norm carry no bias (BN's shift takes that
role). The output layer has neither batch-norm nor dropout.

Class index 0 of a binary branch means "true", index 1 means "false".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datamodel.schema import AttributeSchema
from ..errors import ConfigError, ShapeError

BN_EPS = 1e-3
BN_MOMENTUM = 0.99

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"
TRAIN = "train"


@dataclass(frozen=True)
class MacConfig:
    input_dim: int
    schema: AttributeSchema
    trunk_width: int = 512
    branch_width: int = 512
    dropout_rate: float = 0.5

    def __post_init__(self):
        if min(self.input_dim, self.trunk_width, self.branch_width) < 1:
            raise ConfigError("input_dim and layer widths must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "trunk_width": self.trunk_width,
            "branch_width": self.branch_width,
            "dropout_rate": self.dropout_rate,
        }


@dataclass
class MacModel:
    config: MacConfig
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]
    skipped: tuple[str, ...] = field(default_factory=tuple)

    @property
    def schema(self) -> AttributeSchema:
        return self.config.schema

    def copy(self) -> "MacModel":
        return MacModel(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.buffers.items()},
            self.skipped,
        )


def _branch_key(k: int) -> str:
    return f"branch{k}"


def init_model(config: MacConfig, seed: int = 0) -> MacModel:
    """He-normal weights (std sqrt(2/fan_in)) for ReLU layers, sqrt(1/fan_in) for outputs."""
    rng = np.random.default_rng(seed)
    d, t, b = config.input_dim, config.trunk_width, config.branch_width
    params = {
        "trunk.W": rng.standard_normal((d, t)) * np.sqrt(2.0 / d),
        "trunk.gamma": np.ones(t),
        "trunk.beta": np.zeros(t),
    }
    buffers = {"trunk.mean": np.zeros(t), "trunk.var": np.ones(t)}
    for k, spec in enumerate(config.schema):
        p = _branch_key(k)
        params[f"{p}.W1"] = rng.standard_normal((t, b)) * np.sqrt(2.0 / t)
        params[f"{p}.gamma"] = np.ones(b)
        params[f"{p}.beta"] = np.zeros(b)
        params[f"{p}.W2"] = rng.standard_normal((b, spec.num_classes)) * np.sqrt(1.0 / b)
        params[f"{p}.b2"] = np.zeros(spec.num_classes)
        buffers[f"{p}.mean"] = np.zeros(b)
        buffers[f"{p}.var"] = np.ones(b)
    return MacModel(config, params, buffers)


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _dropout_mask(rng, shape, rate):
    if rate == 0.0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _block(h, gamma, beta, mean, var, batch_stats, mask):
    """Batch-norm -> ReLU -> dropout on pre-activations ``h``."""
    if batch_stats:
        mean, var = h.mean(axis=0), h.var(axis=0)
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (h - mean) * inv
    pre = gamma * xhat + beta
    act = np.maximum(pre, 0.0)
    out = act if mask is None else act * mask
    return out, (xhat, inv, pre, mask, mean, var)


def _block_backward(dout, gamma, cache, batch_stats):
    xhat, inv, pre, mask, _, _ = cache
    dact = dout if mask is None else dout * mask
    dpre = dact * (pre > 0)
    dgamma = (dpre * xhat).sum(axis=0)
    dbeta = dpre.sum(axis=0)
    dxhat = dpre * gamma
    if batch_stats:
        n = dxhat.shape[0]
        dh = inv / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    else:
        dh = dxhat * inv
    return dh, dgamma, dbeta


def forward(model: MacModel, x, mode: str = DETERMINISTIC, rng=None, *, return_cache=False):
    """Per-attribute softmax rows for a batch of embeddings.

    ``deterministic`` uses running batch-norm statistics and no dropout.
    ``stochastic`` keeps the running statistics but samples fresh dropout
    masks from ``rng``. ``train`` uses batch statistics and dropout.
    """
    x = np.asarray(x, dtype=np.float64)
    cfg = model.config
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ShapeError(f"expected embeddings of shape (N, {cfg.input_dim}), got {x.shape}")
    if mode not in (DETERMINISTIC, STOCHASTIC, TRAIN):
        raise ValueError(f"unknown mode {mode!r}")
    drop = mode != DETERMINISTIC and cfg.dropout_rate > 0
    if drop and rng is None:
        raise ValueError("dropout modes need an rng")
    batch_stats = mode == TRAIN
    P, B = model.params, model.buffers
    n = x.shape[0]

    h0 = x @ P["trunk.W"]
    mask = _dropout_mask(rng, (n, cfg.trunk_width), cfg.dropout_rate) if drop else None
    trunk, tcache = _block(h0, P["trunk.gamma"], P["trunk.beta"], B["trunk.mean"], B["trunk.var"], batch_stats, mask)

    probs, bcaches = [], []
    for k, spec in enumerate(cfg.schema):
        p = _branch_key(k)
        h1 = trunk @ P[f"{p}.W1"]
        mask = _dropout_mask(rng, (n, cfg.branch_width), cfg.dropout_rate) if drop else None
        hid, cache = _block(h1, P[f"{p}.gamma"], P[f"{p}.beta"], B[f"{p}.mean"], B[f"{p}.var"], batch_stats, mask)
        probs.append(softmax(hid @ P[f"{p}.W2"] + P[f"{p}.b2"]))
        bcaches.append((hid, cache))
    if return_cache:
        return probs, {"x": x, "trunk": trunk, "tcache": tcache, "branches": bcaches, "batch_stats": batch_stats}
    return probs


def labels_to_index(column) -> np.ndarray:
    """Map tri-state labels to class indices: +1 -> 0, -1 -> 1, 0 -> -1 (ignored)."""
    column = np.asarray(column)
    return np.where(column == 1, 0, np.where(column == -1, 1, -1))


def loss_and_grads(model: MacModel, x, labels, mode=TRAIN, rng=None, active=None):
    """Multi-task cross-entropy and its gradient w.r.t. every trainable parameter.

    ``labels`` is an (N, K) tri-state matrix; entries equal to 0 are left out
    of their attribute's mean. The total loss is the unweighted sum of the
    per-attribute means. ``active`` optionally restricts which branches
    contribute.
    """
    probs, cache = forward(model, x, mode, rng, return_cache=True)
    P = model.params
    cfg = model.config
    grads = {k: np.zeros_like(v) for k, v in P.items()}
    total = 0.0
    dtrunk = np.zeros_like(cache["trunk"])
    batch_stats = cache["batch_stats"]
    labels = np.asarray(labels)
    for k, spec in enumerate(cfg.schema):
        if active is not None and not active[k]:
            continue
        idx = labels_to_index(labels[:, k])
        rows = np.flatnonzero(idx >= 0)
        if rows.size == 0:
            continue
        pr = probs[k]
        total += -np.mean(np.log(np.clip(pr[rows, idx[rows]], 1e-300, None)))
        dz = np.zeros_like(pr)
        dz[rows] = pr[rows]
        dz[rows, idx[rows]] -= 1.0
        dz /= rows.size
        p = _branch_key(k)
        hid, bc = cache["branches"][k]
        grads[f"{p}.W2"] = hid.T @ dz
        grads[f"{p}.b2"] = dz.sum(axis=0)
        dhid = dz @ P[f"{p}.W2"].T
        dh1, grads[f"{p}.gamma"], grads[f"{p}.beta"] = _block_backward(dhid, P[f"{p}.gamma"], bc, batch_stats)
        grads[f"{p}.W1"] = cache["trunk"].T @ dh1
        dtrunk += dh1 @ P[f"{p}.W1"].T
    dh0, grads["trunk.gamma"], grads["trunk.beta"] = _block_backward(
        dtrunk, P["trunk.gamma"], cache["tcache"], batch_stats
    )
    grads["trunk.W"] = cache["x"].T @ dh0
    return total, grads, cache
