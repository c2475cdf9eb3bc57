"""Embedding providers behind one interface.

Every backend returns unit-norm float32 vectors of its declared dimension,
so cosine similarity downstream is a plain dot product. Three providers:

- SyntheticBackend: seeded pseudo-random unit vectors keyed by string, with
  optional "planted" image/text alignments for end-to-end testing.
- FileStoreBackend: lookups in one or more precomputed embedding files.
- HttpBackend: client for the POST /v1/embed service contract.

CachingBackend wraps any of them with an exact-string-keyed cache and call
counters; it never issues a second upstream call for a key it has seen.
"""

from __future__ import annotations

import hashlib
import json
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .errors import (
    ConsistencyError,
    CorruptStoreError,
    MissingEmbeddingError,
    TransportError,
    ValidationError,
)
from .store import EmbeddingStore, open_store

NORM_TOLERANCE = 1e-4


@dataclass(frozen=True)
class ImageRef:
    """One image of a study; (study_id, view_id) is unique within a dataset."""

    study_id: str
    view_id: str
    source: Optional[str] = None
    frontal: bool = True

    @property
    def key(self) -> str:
        return f"{self.study_id}/{self.view_id}"


class EmbeddingBackend(Protocol):
    dimension: int

    def embed_text(self, prompt: str) -> np.ndarray: ...

    def embed_image(self, ref: ImageRef) -> np.ndarray: ...


def _require_prompt(prompt: str) -> None:
    if not prompt:
        raise ValidationError("cannot embed an empty prompt")


class SyntheticBackend:
    """Deterministic oracle backend for tests and demos.

    Vectors are seeded unit gaussians keyed by (kind, key). `planted` maps a
    text key (a prompt string) to the image keys that should align with it:
    each such image becomes normalize(alpha * mean(planted text vectors) +
    (1 - alpha) * noise), so the planted observations score high.
    """

    def __init__(
        self,
        seed: int,
        dimension: int = 512,
        planted: Optional[Mapping[str, Sequence[str]]] = None,
        alpha: float = 0.9,
    ):
        if dimension <= 0:
            raise ValidationError("dimension must be positive")
        if not 0.0 < alpha <= 1.0:
            raise ValidationError("alpha must be in (0, 1]")
        self.seed = int(seed)
        self.dimension = int(dimension)
        self.alpha = float(alpha)
        self._planted_texts: dict[str, list[str]] = {}
        if planted:
            for text_key, image_keys in planted.items():
                for image_key in image_keys:
                    self._planted_texts.setdefault(image_key, []).append(text_key)

    def _unit(self, kind: str, key: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}\x1f{kind}\x1f{key}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec = rng.standard_normal(self.dimension)
        vec /= np.linalg.norm(vec)
        return vec.astype(np.float32)

    def embed_text(self, prompt: str) -> np.ndarray:
        _require_prompt(prompt)
        return self._unit("text", prompt)

    def embed_image(self, ref: ImageRef) -> np.ndarray:
        key = ref.key
        noise = self._unit("image", key).astype(np.float64)
        planted = self._planted_texts.get(key)
        if not planted:
            return noise.astype(np.float32)
        anchor = np.zeros(self.dimension)
        for text_key in planted:
            anchor += self.embed_text(text_key).astype(np.float64)
        anchor /= len(planted)
        vec = self.alpha * anchor + (1.0 - self.alpha) * noise
        vec /= np.linalg.norm(vec)
        return vec.astype(np.float32)


def _served_vector(vec: np.ndarray, key: str, dimension: int) -> np.ndarray:
    """Normalize a stored vector on ingest unless it is already unit-norm.

    Leaving already-normalized vectors untouched keeps file-store reads
    bit-identical to what was written.
    """
    if vec.shape[0] != dimension:
        raise CorruptStoreError(
            f"vector for {key!r} has dimension {vec.shape[0]}, backend declares {dimension}"
        )
    norm = float(np.linalg.norm(vec.astype(np.float64)))
    if not np.isfinite(norm) or norm == 0.0:
        raise CorruptStoreError(f"vector for {key!r} has invalid norm {norm}")
    if abs(norm - 1.0) <= NORM_TOLERANCE:
        return vec
    return (vec.astype(np.float64) / norm).astype(np.float32)


class FileStoreBackend:
    """Serves embeddings from one or more embedding store files.

    Multiple stores (e.g. a text store and an image store) are searched in
    order; they must agree on dimension. Text prompts are looked up by the
    exact prompt string, images by "study_id/view_id".
    """

    def __init__(self, stores: Sequence[EmbeddingStore | str | Path]):
        if not stores:
            raise ValidationError("at least one store is required")
        self._stores = [s if isinstance(s, EmbeddingStore) else open_store(s) for s in stores]
        dims = {s.dimension for s in self._stores}
        if len(dims) > 1:
            raise ConsistencyError(f"stores disagree on dimension: {sorted(dims)}")
        self.dimension = self._stores[0].dimension

    def _lookup(self, key: str) -> np.ndarray:
        for store in self._stores:
            if key in store:
                return _served_vector(store.get(key), key, self.dimension)
        raise MissingEmbeddingError(key)

    def embed_text(self, prompt: str) -> np.ndarray:
        _require_prompt(prompt)
        return self._lookup(prompt)

    def embed_image(self, ref: ImageRef) -> np.ndarray:
        return self._lookup(ref.key)

    def close(self) -> None:
        for store in self._stores:
            store.close()


class HttpBackend:
    """Client for the embedding service: POST {base}/v1/embed.

    Request body {"kind": "text"|"image", "items": [...]}; response
    {"dimension": D, "embeddings": [[...], ...]}. Service vectors are
    normalized on ingest. Connection failures, timeouts and 4xx/5xx
    answers raise TransportError.
    """

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._dimension: Optional[int] = None

    @property
    def dimension(self) -> int:
        if self._dimension is None:
            # probe with a constant item; real callers cache anyway
            self.embed_text("dimension probe")
        return self._dimension  # type: ignore[return-value]

    def _post(self, kind: str, items: list[str]) -> list[np.ndarray]:
        body = json.dumps({"kind": kind, "items": items}).encode("utf-8")
        request = urllib.request.Request(
            f"{self.base_url}/v1/embed",
            data=body,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            try:
                message = json.loads(exc.read().decode("utf-8")).get("error", "")
            except Exception:
                message = exc.reason
            raise TransportError(
                f"embedding service returned {exc.code}: {message}"
            ) from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TransportError(f"embedding service unreachable: {exc}") from exc
        try:
            dimension = int(payload["dimension"])
            embeddings = payload["embeddings"]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed embedding service response: {exc}") from exc
        if self._dimension is None:
            self._dimension = dimension
        elif dimension != self._dimension:
            raise ConsistencyError(
                f"service changed dimension from {self._dimension} to {dimension}"
            )
        if len(embeddings) != len(items):
            raise TransportError(
                f"requested {len(items)} embeddings, service sent {len(embeddings)}"
            )
        out = []
        for item, values in zip(items, embeddings):
            vec = np.asarray(values, dtype=np.float64)
            if vec.ndim != 1 or vec.shape[0] != dimension:
                raise TransportError(f"service vector for {item!r} has wrong shape")
            norm = float(np.linalg.norm(vec))
            if not np.isfinite(norm) or norm == 0.0:
                raise TransportError(f"service vector for {item!r} has invalid norm")
            out.append((vec / norm).astype(np.float32))
        return out

    def embed_texts(self, prompts: list[str]) -> list[np.ndarray]:
        for p in prompts:
            _require_prompt(p)
        if not prompts:
            return []
        return self._post("text", prompts)

    def embed_text(self, prompt: str) -> np.ndarray:
        return self.embed_texts([prompt])[0]

    def embed_image(self, ref: ImageRef) -> np.ndarray:
        return self._post("image", [ref.key])[0]


class CachingBackend:
    """Exact-key cache in front of another backend.

    Concurrent fills of the same key are tolerated: both call upstream,
    both store identical values, last write wins. `text_calls` and
    `image_calls` count upstream requests.
    """

    def __init__(self, inner: EmbeddingBackend):
        self.inner = inner
        self._cache: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()
        self.text_calls = 0
        self.image_calls = 0

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    def embed_text(self, prompt: str) -> np.ndarray:
        cache_key = ("text", prompt)
        with self._lock:
            hit = self._cache.get(cache_key)
        if hit is not None:
            return hit
        vec = self.inner.embed_text(prompt)
        with self._lock:
            self.text_calls += 1
            self._cache[cache_key] = vec
        return vec

    def embed_image(self, ref: ImageRef) -> np.ndarray:
        cache_key = ("image", ref.key)
        with self._lock:
            hit = self._cache.get(cache_key)
        if hit is not None:
            return hit
        vec = self.inner.embed_image(ref)
        with self._lock:
            self.image_calls += 1
            self._cache[cache_key] = vec
        return vec


def synthetic_oracle(
    seed: int,
    dimension: int = 512,
    planted: Optional[Mapping[str, Sequence[str]]] = None,
    alpha: float = 0.9,
) -> SyntheticBackend:
    """Convenience constructor matching the test-oracle vocabulary."""
    return SyntheticBackend(seed=seed, dimension=dimension, planted=planted, alpha=alpha)
