"""Binary model files.

Layout (all integers little-endian)::

    magic        4 bytes   b"MACM"
    version      uint32    currently 1
    schema hash  32 bytes  SHA-256 of the canonical schema JSON
    meta length  uint32
    meta         UTF-8 JSON: {"config": ..., "schema": [...], "skipped": [...],
                 optional "provenance": {...}}
    block count  uint32
    blocks       repeated:
                   name length uint16, name UTF-8,
                   kind uint8 (0 = parameter, 1 = buffer),
                   ndim uint8, shape uint32 * ndim,
                   data float64 little-endian, C order
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .._io import atomic_write_bytes
from ..datamodel.schema import AttributeSchema, AttributeSpec
from ..errors import DataError, SchemaError
from .network import MacConfig, MacModel

MAGIC = b"MACM"
VERSION = 1


def model_to_bytes(model: MacModel, provenance: dict | None = None) -> bytes:
    meta = {
        "config": model.config.to_dict(),
        "schema": model.schema.to_records(),
        "skipped": list(model.skipped),
    }
    if provenance:
        meta["provenance"] = provenance
    meta_b = json.dumps(meta, sort_keys=True).encode()
    out = [MAGIC, struct.pack("<I", VERSION), model.schema.digest(), struct.pack("<I", len(meta_b)), meta_b]
    blocks = [(k, 0, v) for k, v in model.params.items()] + [(k, 1, v) for k, v in model.buffers.items()]
    out.append(struct.pack("<I", len(blocks)))
    for name, kind, arr in blocks:
        nb = name.encode()
        arr = np.ascontiguousarray(arr, dtype="<f8")
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<BB", kind, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def model_from_bytes(data: bytes, schema: AttributeSchema | None = None) -> MacModel:
    """Decode a model; if ``schema`` is given it must match the stored hash."""
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise DataError("truncated model file")
        chunk = view[pos : pos + n]
        pos += n
        return bytes(chunk)

    if take(4) != MAGIC:
        raise DataError("not a model file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise DataError(f"unsupported model file version {version}")
    digest = take(32)
    (mlen,) = struct.unpack("<I", take(4))
    meta = json.loads(take(mlen))
    stored = AttributeSchema(
        AttributeSpec(r["name"], r["class"], int(r["num_classes"]), r.get("category", "")) for r in meta["schema"]
    )
    if stored.digest() != digest:
        raise DataError("schema hash does not match embedded schema")
    if schema is not None and schema.digest() != digest:
        raise SchemaError("model was trained for a different attribute schema")
    config = MacConfig(schema=stored, **meta["config"])
    params, buffers = {}, {}
    (count,) = struct.unpack("<I", take(4))
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode()
        kind, ndim = struct.unpack("<BB", take(2))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
        (params if kind == 0 else buffers)[name] = arr
    return MacModel(config, params, buffers, tuple(meta.get("skipped", ())))


def save_model(model: MacModel, path, provenance: dict | None = None):
    atomic_write_bytes(path, model_to_bytes(model, provenance))


def load_model(path, schema: AttributeSchema | None = None) -> MacModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read(), schema)
