"""Attribute schemas: ordered attributes grouped into mutually exclusive classes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import DomainError, ParseError, SchemaError

TRUE, FALSE, UNDEFINED = 1, -1, 0


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    class_name: str
    num_classes: int = 2
    category: str = ""

    def __post_init__(self):
        if not self.name:
            raise SchemaError("attribute name must be non-empty")
        if self.num_classes < 2:
            raise SchemaError(f"{self.name}: num_classes must be >= 2, got {self.num_classes}")


class AttributeSchema:
    """Ordered attribute list; the order fixes the column order of every matrix.

    Attributes sharing a ``class_name`` are mutually exclusive: at most one of
    them may be true for a sample (e.g. the hair colours).
    """

    def __init__(self, attributes: Iterable[AttributeSpec]):
        self.attributes: tuple[AttributeSpec, ...] = tuple(attributes)
        if not self.attributes:
            raise SchemaError("schema has no attributes")
        names = [a.name for a in self.attributes]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate attribute names: {dupes}")
        self._index = {n: i for i, n in enumerate(names)}
        classes: dict[str, list[int]] = {}
        for i, a in enumerate(self.attributes):
            classes.setdefault(a.class_name, []).append(i)
        self.classes: dict[str, tuple[int, ...]] = {k: tuple(v) for k, v in classes.items()}

    @classmethod
    def simple(cls, names: Sequence[str], classes: dict[str, Sequence[str]] | None = None) -> "AttributeSchema":
        """Binary attributes; those not listed in ``classes`` form singleton classes."""
        owner = {}
        for cname, members in (classes or {}).items():
            for m in members:
                owner[m] = cname
        return cls(AttributeSpec(n, owner.get(n, n)) for n in names)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def __len__(self):
        return len(self.attributes)

    def __iter__(self):
        return iter(self.attributes)

    def __eq__(self, other):
        return isinstance(other, AttributeSchema) and self.attributes == other.attributes

    def __hash__(self):
        return hash(self.attributes)

    def __repr__(self):
        return f"AttributeSchema({self.names})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown attribute {name!r}") from None

    def __contains__(self, name):
        return name in self._index

    def spec(self, name: str) -> AttributeSpec:
        return self.attributes[self.index(name)]

    def subset(self, names: Sequence[str]) -> "AttributeSchema":
        return AttributeSchema(self.spec(n) for n in names)

    def to_records(self) -> list[dict]:
        return [
            {"name": a.name, "class": a.class_name, "category": a.category, "num_classes": a.num_classes}
            for a in self.attributes
        ]

    def digest(self) -> bytes:
        """SHA-256 over the canonical JSON form; used to tie model files to a schema."""
        payload = json.dumps(self.to_records(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).digest()

    def check_compatible(self, other: "AttributeSchema"):
        """Raise if an attribute name appears in both schemas with different definitions."""
        for a in other.attributes:
            if a.name in self._index:
                mine = self.spec(a.name)
                if (mine.class_name, mine.num_classes) != (a.class_name, a.num_classes):
                    raise SchemaError(f"conflicting definitions for attribute {a.name!r}: {mine} vs {a}")


def load_schema(path) -> AttributeSchema:
    path = Path(path)
    try:
        records = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from None
    if not isinstance(records, list):
        raise ParseError(path, 1, "schema must be a JSON array")
    specs = []
    for k, rec in enumerate(records):
        try:
            specs.append(
                AttributeSpec(
                    name=str(rec["name"]),
                    class_name=str(rec.get("class") or rec["name"]),
                    num_classes=int(rec.get("num_classes", 2)),
                    category=str(rec.get("category") or ""),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: entry {k}: {exc}") from None
    return AttributeSchema(specs)


def save_schema(schema: AttributeSchema, path):
    from .._io import atomic_write_text

    atomic_write_text(path, json.dumps(schema.to_records(), indent=2) + "\n")


def check_tristate(values: np.ndarray) -> np.ndarray:
    """Return ``values`` as an int8 matrix, raising if any entry is outside {-1, 0, 1}."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise DomainError(f"annotation matrix must be 2-D, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (-1, 0, 1)).all():
        bad = arr[~np.isin(arr, (-1, 0, 1))][0]
        raise DomainError(f"annotation value {bad!r} outside {{-1, 0, 1}}")
    return arr.astype(np.int8)


def respects_schema(annotations: np.ndarray, schema: AttributeSchema) -> bool:
    """True iff no (sample, class) pair has more than one positive attribute."""
    annotations = np.asarray(annotations)
    for cols in schema.classes.values():
        if len(cols) > 1 and ((annotations[:, list(cols)] == TRUE).sum(axis=1) > 1).any():
            return False
    return True
