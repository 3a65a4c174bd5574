"""Small file helpers: atomic writes, provenance headers, comment-aware CSV reading."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator, Sequence

COMMENT = "#"


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def header_line(meta: dict | None) -> str:
    if not meta:
        return ""
    return COMMENT + " " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"


def format_csv(header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(header_line(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path, header, rows, meta=None):
    atomic_write_text(path, format_csv(header, rows, meta))


def read_csv(path) -> tuple[list[str], Iterator[tuple[int, list[str]]]]:
    """Return the header and an iterator of ``(line_number, row)`` skipping comment lines."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    numbered = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.startswith(COMMENT)]
    if not numbered:
        return [], iter(())
    header = next(csv.reader([numbered[0][1]]))
    rows = ((n, next(csv.reader([ln]))) for n, ln in numbered[1:])
    return [h.strip() for h in header], rows


def fmt_float(x: float) -> str:
    """Shortest round-tripping decimal text for a float."""
    return repr(float(x))


def config_hash(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
