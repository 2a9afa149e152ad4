"""Encoder backends mapping images/texts to unit-norm embedding rows.

The production backend wraps a pretrained dual-stream vision-language
checkpoint (ViT-B/32 by default) through ``transformers``.  Any other
``model_name`` string is passed through to the hub loader unchanged, so
larger checkpoints are a config edit away.

``stub-<dim>`` selects a deterministic hash-projection backend that needs
no model download: every input maps to a reproducible random unit vector
(identical bytes give identical rows).  It carries no semantics and exists
to validate extraction plumbing and file contracts.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

DEFAULT_MODEL = "openai/clip-vit-base-patch32"


class Encoder(Protocol):
    def encode_images(self, paths: Sequence[Path]) -> np.ndarray: ...

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray: ...


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


class StubEncoder:
    """Hash-seeded random projections; deterministic, non-semantic."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError("stub encoder needs dim >= 2")
        self.dim = dim

    def _vector(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        seed = np.frombuffer(digest[:16], dtype=np.uint64)
        rng = np.random.default_rng(seed)
        return rng.standard_normal(self.dim)

    def encode_images(self, paths: Sequence[Path]) -> np.ndarray:
        rows = [self._vector(Path(p).read_bytes()) for p in paths]
        return _unit(np.vstack(rows))

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        rows = [self._vector(t.encode("utf-8")) for t in texts]
        return _unit(np.vstack(rows))


class ClipEncoder:
    """Dual-stream vision-language checkpoint via transformers (lazy import)."""

    def __init__(self, model_name: str = DEFAULT_MODEL, batch_size: int = 64):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "the clip backend needs the [clip] extra: pip install 'featx[clip]'"
            ) from exc
        self._torch = torch
        try:
            self.model = CLIPModel.from_pretrained(model_name)
            self.processor = CLIPProcessor.from_pretrained(model_name)
        except Exception as exc:
            raise RuntimeError(f"failed to load checkpoint {model_name!r}: {exc}") from exc
        self.model.eval()
        self.batch_size = batch_size

    def _batches(self, items):
        for start in range(0, len(items), self.batch_size):
            yield items[start : start + self.batch_size]

    def encode_images(self, paths: Sequence[Path]) -> np.ndarray:
        from PIL import Image

        chunks = []
        with self._torch.no_grad():
            for batch in self._batches(list(paths)):
                images = [Image.open(p).convert("RGB") for p in batch]
                inputs = self.processor(images=images, return_tensors="pt")
                feats = self.model.get_image_features(**inputs)
                chunks.append(feats.cpu().numpy().astype(np.float64))
        return _unit(np.vstack(chunks))

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        chunks = []
        with self._torch.no_grad():
            for batch in self._batches(list(texts)):
                inputs = self.processor(text=batch, return_tensors="pt", padding=True)
                feats = self.model.get_text_features(**inputs)
                chunks.append(feats.cpu().numpy().astype(np.float64))
        return _unit(np.vstack(chunks))


def make_encoder(model_name: str, batch_size: int = 64) -> Encoder:
    if model_name.startswith("stub-"):
        return StubEncoder(dim=int(model_name.split("-", 1)[1]))
    return ClipEncoder(model_name=model_name, batch_size=batch_size)
