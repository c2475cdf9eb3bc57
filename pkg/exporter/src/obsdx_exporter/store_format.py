"""Writer for the engine's embedding store wire format.

Implemented from the format contract so stores stay byte-compatible with
the engine's reader: little-endian, magic "XPLE", u32 version 1, u32
dimension, u64 count, an index of {u32 key_length, key UTF-8, u64 absolute
offset} records, then float32 vector payloads in index order.

A sidecar `<store>.meta.json` carries provenance (model id, preprocessing)
since the binary format itself has no comment field.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"XPLE"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_KEY_LEN = struct.Struct("<I")
_OFFSET = struct.Struct("<Q")


class StoreWriteError(Exception):
    pass


def write_store_file(
    path: str | Path,
    entries: Sequence[tuple[str, np.ndarray]],
    metadata: dict | None = None,
) -> None:
    keys: list[bytes] = []
    seen: set[str] = set()
    dimension = None
    for key, vector in entries:
        if not key:
            raise StoreWriteError("empty keys are not allowed")
        if key in seen:
            raise StoreWriteError(f"key collision: {key!r}")
        seen.add(key)
        if dimension is None:
            dimension = int(vector.shape[0])
        elif vector.shape[0] != dimension:
            raise StoreWriteError(
                f"vector for {key!r} has dimension {vector.shape[0]}, expected {dimension}"
            )
        if not np.all(np.isfinite(vector)):
            raise StoreWriteError(f"vector for {key!r} has non-finite values")
        keys.append(key.encode("utf-8"))

    if dimension is None:
        dimension = 0
    index_size = sum(_KEY_LEN.size + len(k) + _OFFSET.size for k in keys)
    offset = _HEADER.size + index_size
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dimension, len(keys)))
        for k in keys:
            fh.write(_KEY_LEN.pack(len(k)))
            fh.write(k)
            fh.write(_OFFSET.pack(offset))
            offset += dimension * 4
        for _, vector in entries:
            fh.write(np.asarray(vector, dtype="<f4").tobytes())

    if metadata is not None:
        meta_path = path.with_name(path.name + ".meta.json")
        meta_path.write_text(
            json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
