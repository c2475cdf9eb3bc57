"""Dual-encoder wrappers behind a model-identifier registry.

The engine downstream only assumes unit-norm float32 vectors of a declared
dimension, so any encoder that meets that contract plugs in. Two entries:

- "hashed-D" (e.g. "hashed-512"): a deterministic feature hasher. Text is
  character-trigram hashed, images are content-block hashed; every token
  contributes a seeded gaussian direction and the sum is normalized. No
  weights to download, fully reproducible, used by the test suite and as a
  stand-in when no pretrained checkpoint is available.
- "biovil": a radiology report/image dual encoder. Loading requires the
  optional hi-ml-multimodal dependency and downloaded weights; without
  them resolve_encoder raises EncoderLoadError.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np


class EncoderLoadError(Exception):
    """The requested model identifier could not be loaded."""


class DualEncoder(Protocol):
    model_id: str
    dimension: int
    preprocess: str

    def encode_text(self, texts: Sequence[str]) -> np.ndarray: ...

    def encode_image(self, path: str | Path) -> np.ndarray: ...


def _token_direction(token: bytes, dimension: int) -> np.ndarray:
    digest = hashlib.sha256(token).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dimension)


class HashedEncoder:
    """Deterministic trigram/block hashing encoder.

    Inference-mode determinism is structural: the output is a pure function
    of the input bytes and the dimension.
    """

    preprocess = "none (content hashing)"

    def __init__(self, dimension: int = 512):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.model_id = f"hashed-{dimension}"

    def _accumulate(self, tokens: list[bytes]) -> np.ndarray:
        acc = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            acc += _token_direction(token, self.dimension)
        norm = float(np.linalg.norm(acc))
        if norm == 0.0:
            acc = _token_direction(b"\x00empty", self.dimension)
            norm = float(np.linalg.norm(acc))
        return (acc / norm).astype(np.float32)

    def encode_text(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dimension), dtype=np.float32)
        for i, text in enumerate(texts):
            padded = f"\x02{text.lower()}\x03".encode("utf-8")
            tokens = [padded[j : j + 3] for j in range(max(1, len(padded) - 2))]
            out[i] = self._accumulate(tokens)
        return out

    def encode_image(self, path: str | Path) -> np.ndarray:
        data = Path(path).read_bytes()
        tokens = [data[j : j + 4096] for j in range(0, max(1, len(data)), 4096)]
        tokens.append(f"len:{len(data)}".encode("ascii"))
        return self._accumulate(tokens)


class BioVilEncoder:
    """Adapter for the BioVil report/image dual encoder (optional dependency)."""

    preprocess = "resize 512, center crop 480, intensity normalization"

    def __init__(self):
        try:
            from health_multimodal.image import get_image_inference  # type: ignore
            from health_multimodal.text import get_cxr_bert_inference  # type: ignore
        except ImportError as exc:
            raise EncoderLoadError(
                "model 'biovil' needs the optional hi-ml-multimodal package "
                "and downloaded weights; pip install hi-ml-multimodal"
            ) from exc
        self._text = get_cxr_bert_inference()
        self._image = get_image_inference()
        self.dimension = 128
        self.model_id = "biovil"

    def encode_text(self, texts: Sequence[str]) -> np.ndarray:
        vectors = self._text.get_embeddings_from_prompt(list(texts), normalize=True)
        return np.asarray(vectors, dtype=np.float32)

    def encode_image(self, path: str | Path) -> np.ndarray:
        vector = self._image.get_projected_global_embedding(Path(path))
        arr = np.asarray(vector, dtype=np.float64)
        return (arr / np.linalg.norm(arr)).astype(np.float32)


def resolve_encoder(model_id: str) -> DualEncoder:
    """Look up a model identifier; raises EncoderLoadError when unusable."""
    normalized = model_id.strip().lower()
    if normalized.startswith("hashed-"):
        try:
            dimension = int(normalized.split("-", 1)[1])
        except ValueError:
            raise EncoderLoadError(f"bad hashed model id {model_id!r}; use hashed-<dim>")
        return HashedEncoder(dimension)
    if normalized == "biovil":
        return BioVilEncoder()
    raise EncoderLoadError(f"unknown model identifier {model_id!r} (try hashed-512)")
