"""Binary embedding store: a flat file of float32 vectors behind a key index.

Layout (little-endian):

    magic "XPLE" | u32 version=1 | u32 dimension D | u64 count
    index: count * { u32 key_length | key bytes (UTF-8) | u64 byte offset }
    payload: count vectors of D consecutive float32 values

Offsets are absolute file positions. Vectors are written in index order, so
the expected file size is fully determined by the header and index; any
shortfall is treated as truncation. Reads go through a single mmap, which
makes an open store safe for unrestricted concurrent readers. Writing is
single-writer, whole-file.
"""

from __future__ import annotations

import mmap
import struct
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CorruptStoreError, MissingEmbeddingError, ValidationError

MAGIC = b"XPLE"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_KEY_LEN = struct.Struct("<I")
_OFFSET = struct.Struct("<Q")


def write_store(
    path: str | Path,
    entries: Iterable[tuple[str, Sequence[float] | np.ndarray]],
    dimension: int | None = None,
) -> None:
    """Write (key, vector) pairs to `path`.

    All vectors must share one dimension and every value must be finite;
    keys must be unique and non-empty. Values are stored as float32 exactly
    as given (after the float32 cast), so open/read round-trips are
    bit-identical.
    """
    keys: list[bytes] = []
    vectors: list[np.ndarray] = []
    seen: set[str] = set()
    for key, vector in entries:
        if not isinstance(key, str) or not key:
            raise ValidationError(f"store keys must be non-empty strings, got {key!r}")
        if key in seen:
            raise ValidationError(f"duplicate store key {key!r}")
        seen.add(key)
        arr = np.asarray(vector, dtype=np.float32)
        if arr.ndim != 1:
            raise ValidationError(f"vector for key {key!r} is not one-dimensional")
        if dimension is None:
            dimension = arr.shape[0]
        if arr.shape[0] != dimension:
            raise ValidationError(
                f"vector for key {key!r} has dimension {arr.shape[0]}, expected {dimension}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"vector for key {key!r} contains non-finite values")
        keys.append(key.encode("utf-8"))
        vectors.append(arr)

    if dimension is None:
        dimension = 0

    index_size = sum(_KEY_LEN.size + len(k) + _OFFSET.size for k in keys)
    payload_start = _HEADER.size + index_size
    vector_bytes = dimension * 4

    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dimension, len(keys)))
        offset = payload_start
        for k in keys:
            fh.write(_KEY_LEN.pack(len(k)))
            fh.write(k)
            fh.write(_OFFSET.pack(offset))
            offset += vector_bytes
        for arr in vectors:
            fh.write(arr.astype("<f4", copy=False).tobytes())


class EmbeddingStore:
    """Read-only view of an embedding file. Use `open_store` to create one."""

    def __init__(self, path: Path, dimension: int, index: dict[str, int], mm: mmap.mmap):
        self.path = path
        self.dimension = dimension
        self._index = index
        self._mmap = mm

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def keys(self) -> Iterator[str]:
        return iter(self._index)

    def get(self, key: str) -> np.ndarray:
        try:
            offset = self._index[key]
        except KeyError:
            raise MissingEmbeddingError(key) from None
        vec = np.frombuffer(self._mmap, dtype="<f4", count=self.dimension, offset=offset)
        return vec.copy()

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for key in self._index:
            yield key, self.get(key)

    def close(self) -> None:
        if self._mmap is not None:
            self._mmap.close()
            self._mmap = None  # type: ignore[assignment]

    def __enter__(self) -> "EmbeddingStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_store(path: str | Path) -> EmbeddingStore:
    """Open and validate an embedding file; raises CorruptStoreError."""
    path = Path(path)
    try:
        fh = open(path, "rb")
    except FileNotFoundError:
        raise CorruptStoreError(f"embedding store not found: {path}") from None
    with fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise CorruptStoreError(f"{path}: truncated header")
        magic, version, dimension, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise CorruptStoreError(f"{path}: bad magic {magic!r}, not an embedding store")
        if version != VERSION:
            raise CorruptStoreError(f"{path}: unsupported version {version}")

        index: dict[str, int] = {}
        pos = _HEADER.size
        for i in range(count):
            raw_len = fh.read(_KEY_LEN.size)
            if len(raw_len) < _KEY_LEN.size:
                raise CorruptStoreError(f"{path}: truncated index at entry {i}")
            (key_len,) = _KEY_LEN.unpack(raw_len)
            key_bytes = fh.read(key_len)
            raw_off = fh.read(_OFFSET.size)
            if len(key_bytes) < key_len or len(raw_off) < _OFFSET.size:
                raise CorruptStoreError(f"{path}: truncated index at entry {i}")
            try:
                key = key_bytes.decode("utf-8")
            except UnicodeDecodeError:
                raise CorruptStoreError(f"{path}: index entry {i} is not valid UTF-8") from None
            if key in index:
                raise CorruptStoreError(f"{path}: duplicate key {key!r} in index")
            (offset,) = _OFFSET.unpack(raw_off)
            index[key] = offset
            pos += _KEY_LEN.size + key_len + _OFFSET.size

        payload_start = pos
        expected_size = payload_start + count * dimension * 4
        actual_size = path.stat().st_size
        if actual_size != expected_size:
            raise CorruptStoreError(
                f"{path}: expected {expected_size} bytes, found {actual_size} (truncated or trailing data)"
            )
        for key, offset in index.items():
            if offset < payload_start or offset + dimension * 4 > expected_size:
                raise CorruptStoreError(f"{path}: offset of key {key!r} points outside payload")

        if count == 0:
            # mmap rejects zero-length maps; keep a 1-byte map of the header
            fh.seek(0)
            mm = mmap.mmap(-1, max(actual_size, 1))
            mm.write(fh.read())
        else:
            mm = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
    return EmbeddingStore(path=path, dimension=dimension, index=index, mm=mm)
