"""Synthetic embedding datasets with known attribute truth.

Each subject draws a latent attribute vector that respects the schema's
exclusive classes. Embeddings place each attribute along its own direction,
so a linear probe recovers the attribute with a difficulty set by
``separation``; observed annotations are the truth corrupted by label flips
(``noise_rate``) and erasures (``undefined_rate``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import ConfigError
from .dataset import AnnotatedDataset
from .schema import AttributeSchema


@dataclass
class SyntheticSpec:
    n_subjects: int = 50
    samples_per_subject: int = 5
    dim: int = 16
    n_attributes: int = 6
    schema: AttributeSchema | None = None
    separation: float | Sequence[float] = 6.0
    noise_rate: float | Sequence[float] = 0.0
    undefined_rate: float = 0.0
    prevalence: float = 0.5
    sample_flip_rate: float = 0.0
    subject_spread: float = 0.5
    n_sources: int = 2
    names: Sequence[str] | None = None

    def resolved_schema(self) -> AttributeSchema:
        if self.schema is not None:
            return self.schema
        return AttributeSchema.simple([f"attr{k}" for k in range(self.n_attributes)])

    def validate(self):
        k = len(self.resolved_schema())
        for label, value in (("noise_rate", self.noise_rate), ("separation", self.separation)):
            arr = np.broadcast_to(np.asarray(value, dtype=float), (k,)) if np.ndim(value) == 0 else np.asarray(value, float)
            if arr.shape != (k,):
                raise ConfigError(f"{label} must be scalar or have one value per attribute ({k})")
            if label == "noise_rate" and ((arr < 0) | (arr > 1)).any():
                raise ConfigError(f"noise_rate must lie in [0, 1], got {value}")
        for label, value in (
            ("undefined_rate", self.undefined_rate),
            ("prevalence", self.prevalence),
            ("sample_flip_rate", self.sample_flip_rate),
        ):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{label} must lie in [0, 1], got {value}")
        if self.n_subjects < 1 or self.samples_per_subject < 1 or self.dim < 1:
            raise ConfigError("n_subjects, samples_per_subject and dim must be positive")
        if self.n_sources < 0:
            raise ConfigError("n_sources must be >= 0")
        if self.names is not None and len(self.names) != self.n_sources + 1:
            raise ConfigError("names must list every source followed by the target")


class SyntheticData(NamedTuple):
    sources: list[AnnotatedDataset]
    target: AnnotatedDataset
    truth: dict[str, np.ndarray]


def _directions(rng, dim, k):
    if dim >= k:
        q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
        return q.T
    u = rng.standard_normal((k, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _subject_truth(rng, schema: AttributeSchema, n, prevalence):
    truth = -np.ones((n, len(schema)), dtype=np.int8)
    for cols in schema.classes.values():
        if len(cols) == 1:
            truth[:, cols[0]] = np.where(rng.random(n) < prevalence, 1, -1)
        else:
            # one member true, or none with probability 1/(c+1)
            pick = rng.integers(0, len(cols) + 1, size=n)
            for j, c in enumerate(cols):
                truth[pick == j, c] = 1
    return truth


def generate_synthetic(spec: SyntheticSpec, seed: int = 0) -> SyntheticData:
    """Draw ``spec.n_sources`` source datasets and one target from one process.

    All datasets share the embedding geometry but have disjoint subjects.
    The returned ``truth`` maps each dataset name to its hidden per-sample
    truth matrix.
    """
    spec.validate()
    schema = spec.resolved_schema()
    k = len(schema)
    rng = np.random.default_rng(seed)
    sep = np.broadcast_to(np.asarray(spec.separation, dtype=float), (k,))
    noise = np.broadcast_to(np.asarray(spec.noise_rate, dtype=float), (k,))
    directions = _directions(rng, spec.dim, k)
    names = list(spec.names) if spec.names else [f"source{i}" for i in range(spec.n_sources)] + ["target"]

    datasets, truth = [], {}
    for name in names:
        n_subj, per = spec.n_subjects, spec.samples_per_subject
        latent = _subject_truth(rng, schema, n_subj, spec.prevalence)
        offsets = rng.standard_normal((n_subj, spec.dim)) * spec.subject_spread
        subj_idx = np.repeat(np.arange(n_subj), per)
        y = latent[subj_idx].copy()
        if spec.sample_flip_rate > 0:
            singles = [c[0] for c in schema.classes.values() if len(c) == 1]
            flips = rng.random((len(y), len(singles))) < spec.sample_flip_rate
            y[:, singles] = np.where(flips, -y[:, singles], y[:, singles])
        emb = (y * (sep / 2.0)) @ directions + offsets[subj_idx] + rng.standard_normal((len(y), spec.dim))
        observed = np.where(rng.random(y.shape) < noise, -y, y)
        observed = np.where(rng.random(y.shape) < spec.undefined_rate, 0, observed).astype(np.int8)
        sample_ids = [f"{name}_{s:04d}_{j:02d}" for s in range(n_subj) for j in range(per)]
        subject_ids = [f"{name}_id{s:04d}" for s in subj_idx]
        datasets.append(AnnotatedDataset(sample_ids, subject_ids, emb, observed, schema, name=name))
        truth[name] = y
    return SyntheticData(datasets[:-1], datasets[-1], truth)
