"""Batch export of text and image embeddings into store files.

Text manifests are plain lines; each line is both the key and the prompt
(the engine looks text embeddings up by the exact prompt string). A line
may instead be "key<TAB>prompt" when the store key should differ. Image
manifests are "key<TAB>path" lines, keys conventionally "study_id/view_id".

Unreadable images do not abort the job: the item is reported, the rest is
exported, and the caller receives the error list to decide the exit code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .encoders import DualEncoder
from .store_format import StoreWriteError, write_store_file


class ExportError(Exception):
    pass


@dataclass
class ExportResult:
    store_path: Path
    exported: int
    failures: list[tuple[str, str]] = field(default_factory=list)  # (key, reason)

    @property
    def ok(self) -> bool:
        return not self.failures


def _metadata(encoder: DualEncoder, kind: str, count: int) -> dict:
    return {
        "kind": kind,
        "model": encoder.model_id,
        "dimension": encoder.dimension,
        "preprocess": encoder.preprocess,
        "count": count,
        "format": "XPLE v1",
    }


def parse_text_manifest(lines: Sequence[str]) -> list[tuple[str, str]]:
    items = []
    for line in lines:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if "\t" in line:
            key, _, prompt = line.partition("\t")
        else:
            key = prompt = line
        items.append((key, prompt))
    return items


def parse_image_manifest(lines: Sequence[str]) -> list[tuple[str, str]]:
    items = []
    for number, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise ExportError(f"image manifest line {number}: expected 'key<TAB>path'")
        key, _, path = line.partition("\t")
        if not key or not path:
            raise ExportError(f"image manifest line {number}: empty key or path")
        items.append((key, path))
    return items


def export_text(
    items: Sequence[tuple[str, str]], encoder: DualEncoder, out: str | Path
) -> ExportResult:
    """Encode (key, prompt) pairs and write them to `out`.

    Deterministic: the same items and model produce byte-identical stores.
    """
    keys = [key for key, _ in items]
    if len(set(keys)) != len(keys):
        dupes = sorted({k for k in keys if keys.count(k) > 1})
        raise ExportError(f"key collision in manifest: {', '.join(dupes)}")
    prompts = [prompt for _, prompt in items]
    vectors = encoder.encode_text(prompts) if prompts else np.empty((0, encoder.dimension))
    entries = [(key, vectors[i]) for i, key in enumerate(keys)]
    try:
        write_store_file(out, entries, metadata=_metadata(encoder, "text", len(entries)))
    except StoreWriteError as exc:
        raise ExportError(str(exc)) from exc
    return ExportResult(store_path=Path(out), exported=len(entries))


def export_images(
    items: Sequence[tuple[str, str]], encoder: DualEncoder, out: str | Path
) -> ExportResult:
    """Encode (key, image path) pairs; unreadable paths are skipped and listed."""
    keys = [key for key, _ in items]
    if len(set(keys)) != len(keys):
        dupes = sorted({k for k in keys if keys.count(k) > 1})
        raise ExportError(f"key collision in manifest: {', '.join(dupes)}")
    entries = []
    failures: list[tuple[str, str]] = []
    for key, path in items:
        try:
            entries.append((key, encoder.encode_image(path)))
        except OSError as exc:
            failures.append((key, str(exc)))
    try:
        write_store_file(out, entries, metadata=_metadata(encoder, "image", len(entries)))
    except StoreWriteError as exc:
        raise ExportError(str(exc)) from exc
    return ExportResult(store_path=Path(out), exported=len(entries), failures=failures)
