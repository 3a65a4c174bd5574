"""Embedding-level annotated datasets, their CSV formats and subject-exclusive splits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .._io import fmt_float, read_csv, write_csv
from ..errors import DomainError, DuplicateError, ParseError, ShapeError, SplitError
from .schema import AttributeSchema, check_tristate, load_schema


def _readonly(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AnnotatedDataset:
    """Samples with embeddings, subject ids and a tri-state annotation matrix.

    ``annotations[i, k]`` is +1 (true), -1 (false) or 0 (undefined) for
    sample ``i`` and attribute ``schema.attributes[k]``. Arrays are made
    read-only on construction.
    """

    sample_ids: tuple[str, ...]
    subject_ids: tuple[str, ...]
    embeddings: np.ndarray
    annotations: np.ndarray
    schema: AttributeSchema
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))
        emb = np.asarray(self.embeddings, dtype=np.float64)
        n = len(self.sample_ids)
        if emb.ndim != 2 or emb.shape[0] != n:
            raise ShapeError(f"embeddings must be ({n}, D), got {emb.shape}")
        if len(self.subject_ids) != n:
            raise ShapeError("subject_ids and sample_ids differ in length")
        if len(set(self.sample_ids)) != n:
            seen, dup = set(), None
            for s in self.sample_ids:
                if s in seen:
                    dup = s
                    break
                seen.add(s)
            raise DuplicateError(f"duplicate sample_id {dup!r}")
        ann = np.asarray(self.annotations)
        if ann.shape != (n, len(self.schema)):
            raise ShapeError(f"annotation matrix must be ({n}, {len(self.schema)}), got {ann.shape}")
        object.__setattr__(self, "embeddings", _readonly(emb))
        object.__setattr__(self, "annotations", _readonly(check_tristate(ann)))

    def __len__(self):
        return len(self.sample_ids)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def subjects(self) -> list[str]:
        return sorted(set(self.subject_ids))

    def take(self, indices, name=None) -> "AnnotatedDataset":
        idx = np.asarray(indices, dtype=int)
        return AnnotatedDataset(
            sample_ids=[self.sample_ids[i] for i in idx],
            subject_ids=[self.subject_ids[i] for i in idx],
            embeddings=self.embeddings[idx],
            annotations=self.annotations[idx],
            schema=self.schema,
            name=self.name if name is None else name,
        )

    def select_subjects(self, subjects, name=None) -> "AnnotatedDataset":
        keep = set(subjects)
        return self.take([i for i, s in enumerate(self.subject_ids) if s in keep], name=name)

    def select_attributes(self, names: Sequence[str], name=None) -> "AnnotatedDataset":
        cols = [self.schema.index(n) for n in names]
        return AnnotatedDataset(
            self.sample_ids,
            self.subject_ids,
            self.embeddings,
            self.annotations[:, cols],
            self.schema.subset(names),
            name=self.name if name is None else name,
        )

    def with_annotations(self, annotations, schema=None) -> "AnnotatedDataset":
        return AnnotatedDataset(
            self.sample_ids, self.subject_ids, self.embeddings, annotations, schema or self.schema, self.name
        )


@dataclass(frozen=True)
class SubjectSplit:
    train_subjects: frozenset
    test_subjects: frozenset
    seed: int
    train_fraction: float

    def apply(self, dataset: AnnotatedDataset) -> tuple[AnnotatedDataset, AnnotatedDataset]:
        train = dataset.select_subjects(self.train_subjects, name=f"{dataset.name}:train" if dataset.name else "")
        test = dataset.select_subjects(self.test_subjects, name=f"{dataset.name}:test" if dataset.name else "")
        return train, test


def split_subject_exclusive(dataset_or_subjects, train_fraction: float = 0.8, seed: int = 0) -> SubjectSplit:
    """Deterministically assign whole subjects to a train and a test side.

    Subject ids are sorted, permuted with ``seed`` and the first
    ``ceil(train_fraction * S)`` go to training. At least one subject is kept
    on each side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise SplitError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if isinstance(dataset_or_subjects, AnnotatedDataset):
        subjects = dataset_or_subjects.subjects
    else:
        subjects = sorted(set(map(str, dataset_or_subjects)))
    if len(subjects) < 2:
        raise SplitError(f"need at least 2 subjects to split, got {len(subjects)}")
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_train = min(max(math.ceil(train_fraction * len(subjects) - 1e-9), 1), len(subjects) - 1)
    shuffled = [subjects[i] for i in order]
    return SubjectSplit(frozenset(shuffled[:n_train]), frozenset(shuffled[n_train:]), seed, train_fraction)


# ---------------------------------------------------------------------------
# CSV formats


def save_embeddings(dataset: AnnotatedDataset, path, meta=None):
    header = ["sample_id", "subject_id"] + [f"e{k}" for k in range(dataset.dim)]
    rows = (
        [sid, subj, *map(fmt_float, emb)]
        for sid, subj, emb in zip(dataset.sample_ids, dataset.subject_ids, dataset.embeddings)
    )
    write_csv(path, header, rows, meta)


def save_annotations(sample_ids, annotations, schema: AttributeSchema, path, meta=None):
    annotations = np.asarray(annotations)
    rows = ([sid, *(str(int(v)) for v in row)] for sid, row in zip(sample_ids, annotations))
    write_csv(path, ["sample_id", *schema.names], rows, meta)


def save_continuous(sample_ids, scores, schema: AttributeSchema, path, meta=None):
    rows = ([sid, *map(fmt_float, row)] for sid, row in zip(sample_ids, np.asarray(scores)))
    write_csv(path, ["sample_id", *schema.names], rows, meta)


def save_dataset(dataset: AnnotatedDataset, embeddings_path, annotations_path, schema_path=None, meta=None):
    save_embeddings(dataset, embeddings_path, meta)
    save_annotations(dataset.sample_ids, dataset.annotations, dataset.schema, annotations_path, meta)
    if schema_path is not None:
        from .schema import save_schema

        save_schema(dataset.schema, schema_path)


def load_embeddings(path):
    """Return ``(sample_ids, subject_ids, embeddings)`` from an embeddings CSV."""
    header, rows = read_csv(path)
    if header[:2] != ["sample_id", "subject_id"]:
        raise ParseError(path, 1, "header must start with sample_id,subject_id")
    dim = len(header) - 2
    sids, subj, emb, seen = [], [], [], set()
    for line, row in rows:
        if len(row) != dim + 2:
            raise ParseError(path, line, f"expected {dim + 2} fields, got {len(row)}")
        try:
            vec = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        if not all(math.isfinite(v) for v in vec):
            raise ParseError(path, line, "non-finite embedding value")
        if row[0] in seen:
            raise DuplicateError(f"{path}:{line}: duplicate sample_id {row[0]!r}")
        seen.add(row[0])
        sids.append(row[0])
        subj.append(row[1])
        emb.append(vec)
    return sids, subj, np.array(emb, dtype=np.float64).reshape(len(sids), dim)


def _load_matrix(path, schema, parse):
    header, rows = read_csv(path)
    if not header or header[0] != "sample_id":
        raise ParseError(path, 1, "header must start with sample_id")
    names = header[1:]
    if schema is not None:
        missing = [n for n in schema.names if n not in names]
        if missing:
            raise ParseError(path, 1, f"missing attribute columns {missing}")
        cols = [names.index(n) for n in schema.names]
    else:
        cols = list(range(len(names)))
    sids, values, seen = [], [], set()
    for line, row in rows:
        if len(row) != len(header):
            raise ParseError(path, line, f"expected {len(header)} fields, got {len(row)}")
        if row[0] in seen:
            raise DuplicateError(f"{path}:{line}: duplicate sample_id {row[0]!r}")
        seen.add(row[0])
        cells = row[1:]
        try:
            values.append([parse(cells[c], path, line) for c in cols])
        except DomainError:
            raise
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        sids.append(row[0])
    return sids, [names[c] for c in cols], values


def _parse_tristate(text, path, line):
    v = int(text)
    if v not in (-1, 0, 1):
        raise DomainError(f"{path}:{line}: annotation value {v} outside {{-1, 0, 1}}")
    return v


def _parse_score(text, path, line):
    v = float(text)
    if not math.isfinite(v):
        raise ParseError(path, line, "non-finite score")
    return v


def load_annotations(path, schema: AttributeSchema | None = None):
    """Return ``(sample_ids, attribute_names, matrix)`` for a tri-state annotation CSV."""
    sids, names, values = _load_matrix(path, schema, _parse_tristate)
    return sids, names, np.array(values, dtype=np.int8).reshape(len(sids), len(names))


def load_continuous(path, schema: AttributeSchema | None = None):
    sids, names, values = _load_matrix(path, schema, _parse_score)
    return sids, names, np.array(values, dtype=np.float64).reshape(len(sids), len(names))


def align_rows(sample_ids, other_ids, matrix, what="annotations"):
    """Reorder ``matrix`` (keyed by ``other_ids``) to follow ``sample_ids`` exactly."""
    pos = {s: i for i, s in enumerate(other_ids)}
    only_left = [s for s in sample_ids if s not in pos]
    only_right = sorted(set(other_ids) - set(sample_ids))
    if only_left or only_right:
        raise DomainError(
            f"{what}: sample ids not shared by both files "
            f"(missing: {only_left[:5]}, unexpected: {only_right[:5]})"
        )
    return np.asarray(matrix)[[pos[s] for s in sample_ids]]


def load_dataset(embeddings_path, annotations_path, schema_path, name="") -> AnnotatedDataset:
    schema = load_schema(schema_path) if not isinstance(schema_path, AttributeSchema) else schema_path
    sids, subj, emb = load_embeddings(embeddings_path)
    ann_ids, _, ann = load_annotations(annotations_path, schema)
    ann = align_rows(sids, ann_ids, ann)
    return AnnotatedDataset(sids, subj, emb, ann, schema, name=name or Path(embeddings_path).stem)
