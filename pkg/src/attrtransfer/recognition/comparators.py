"""Comparators that turn two annotation rows into a similarity score."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .._io import fmt_float, read_csv, write_csv
from ..datamodel.schema import AttributeSchema
from ..errors import ParseError, ShapeError, StageError
from .features import SLOT_NAMES, hamming_score, joint_features
from .pairs import PairSamplingConfig, sample_training_pairs


@dataclass(frozen=True)
class HammingComparator:
    literal: bool = False

    def score_pairs(self, ref, probe) -> np.ndarray:
        ref = np.asarray(ref)
        return hamming_score(joint_features(ref, probe), ref.shape[-1], self.literal)


@dataclass
class LogRegComparator:
    weights: np.ndarray
    bias: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size % 3:
            raise ShapeError("logistic weights must be a vector of length 3 * n_attributes")

    @property
    def n_attributes(self) -> int:
        return self.weights.size // 3

    def score_features(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.weights.size:
            raise ShapeError(f"feature length {features.shape[-1]} != weight length {self.weights.size}")
        return expit(features @ self.weights + self.bias)

    def score_pairs(self, ref, probe) -> np.ndarray:
        return self.score_features(joint_features(ref, probe))


def logreg_score(comparator: LogRegComparator, joint_feature):
    return comparator.score_features(joint_feature)


def fit_logistic(features, labels, l2: float = 1e-3):
    """Minimise mean logistic loss + ``l2 / 2 * ||w||^2`` (bias unpenalised) with L-BFGS."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, d = X.shape

    def objective(theta):
        w, b = theta[:d], theta[d]
        z = X @ w + b
        # log(1 + e^z) - y z, computed stably
        loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * w @ w
        g = expit(z) - y
        grad = np.concatenate([X.T @ g / n + l2 * w, [g.mean()]])
        return loss, grad

    res = minimize(objective, np.zeros(d + 1), jac=True, method="L-BFGS-B", options={"maxiter": 1000})
    return res.x[:d], float(res.x[d])


def train_logreg(
    annotations, subject_ids, config: PairSamplingConfig = PairSamplingConfig(), seed: int = 0, l2: float = 1e-3
) -> LogRegComparator:
    """Fit a logistic comparator on joint features of sampled training pairs."""
    annotations = np.asarray(annotations)
    pairs = sample_training_pairs(annotations, subject_ids, config, seed)
    if not pairs.genuine.any():
        raise StageError("no genuine training pairs")
    X = joint_features(annotations[pairs.ref], annotations[pairs.probe])
    w, b = fit_logistic(X, pairs.genuine.astype(float), l2)
    meta = {
        "genuine_pairs": int(pairs.genuine.sum()),
        "imposter_pairs": int((~pairs.genuine).sum()),
        "seed": seed,
        "l2": l2,
    }
    return LogRegComparator(w, b, meta)


def attribute_importance(comparator: LogRegComparator, schema: AttributeSchema) -> dict[str, list[tuple[str, float]]]:
    """Signed weights per slot type; positive supports genuine, negative imposter decisions."""
    if comparator.n_attributes != len(schema):
        raise ShapeError("comparator and schema disagree on the number of attributes")
    w = comparator.weights.reshape(len(schema), 3)
    return {slot: [(n, float(w[k, j])) for k, n in enumerate(schema.names)] for j, slot in enumerate(SLOT_NAMES)}


def save_logreg(comparator: LogRegComparator, schema: AttributeSchema, path, meta=None):
    rows = [["(bias)", "", fmt_float(comparator.bias)]]
    w = comparator.weights.reshape(len(schema), 3)
    for k, n in enumerate(schema.names):
        for j, slot in enumerate(SLOT_NAMES):
            rows.append([n, slot, fmt_float(w[k, j])])
    write_csv(path, ["attribute", "slot", "weight"], rows, meta)


def load_logreg(path, schema: AttributeSchema) -> LogRegComparator:
    header, rows = read_csv(path)
    if header != ["attribute", "slot", "weight"]:
        raise ParseError(path, 1, "header must be attribute,slot,weight")
    w = np.zeros((len(schema), 3))
    bias = 0.0
    for line, row in rows:
        if len(row) != 3:
            raise ParseError(path, line, "expected 3 fields")
        if row[0] == "(bias)":
            bias = float(row[2])
        elif row[1] not in SLOT_NAMES:
            raise ParseError(path, line, f"unknown slot {row[1]!r}")
        else:
            w[schema.index(row[0]), SLOT_NAMES.index(row[1])] = float(row[2])
    return LogRegComparator(w.ravel(), bias)
