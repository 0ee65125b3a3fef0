"""Deterministic encoders behind a pluggable registry.

The default ``lexical-hash-v1`` encoder needs no downloaded weights:

* text embeds as the normalized sum of hashed unigram and bigram
  feature directions, so word order matters (a caption scores higher
  against its frames than the same words shuffled);
* a frame descriptor that points at a readable image file embeds from
  a 16x16 grayscale thumbnail through a seeded random projection, and
  anything else embeds as frame text.

Real vision-language encoders can be registered under their own model
identifiers; every encoder must be deterministic in inference mode and
return unit-norm vectors of a fixed dimension.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


class LexicalHashEncoder:
    """Order-sensitive hashed n-gram text encoder plus thumbnail frames."""

    name = "lexical-hash-v1"

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = int(dim)
        self.seed = int(seed)
        self._directions: dict[str, np.ndarray] = {}
        digest = hashlib.blake2b(f"{seed}:pixel-projection".encode(),
                                 digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        self._pixel_projection = rng.standard_normal((256, self.dim))

    def _direction(self, feature: str) -> np.ndarray:
        vec = self._directions.get(feature)
        if vec is None:
            digest = hashlib.blake2b(f"{self.seed}:{feature}".encode("utf-8"),
                                     digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim)
            self._directions[feature] = vec
        return vec

    @staticmethod
    def _tokens(text: str) -> list[str]:
        return [t for t in text.lower().split() if t]

    def embed_text(self, text: str) -> np.ndarray:
        tokens = self._tokens(text)
        total = np.zeros(self.dim)
        for token in tokens:
            total += self._direction(f"uni:{token}")
        for left, right in zip(tokens, tokens[1:]):
            total += self._direction(f"bi:{left} {right}")
        if not tokens:
            total = self._direction("uni:")
        norm = np.linalg.norm(total)
        return total / norm

    def _embed_image(self, path: Path) -> np.ndarray | None:
        try:
            from PIL import Image

            with Image.open(path) as img:
                gray = img.convert("L").resize((16, 16))
            pixels = np.asarray(gray, dtype=np.float64).ravel() / 255.0
        except Exception:
            return None
        pixels = pixels - pixels.mean()
        vec = pixels @ self._pixel_projection
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec = self._direction("uni:blank-image")
            norm = np.linalg.norm(vec)
        return vec / norm

    def embed_frame(self, descriptor: str) -> np.ndarray:
        path = Path(descriptor)
        if len(descriptor) < 4096:
            try:
                is_file = path.is_file()
            except OSError:
                is_file = False
            if is_file:
                vec = self._embed_image(path)
                if vec is not None:
                    return vec
        return self.embed_text(descriptor)

    def match(self, text: str, frames: np.ndarray) -> float:
        pooled = np.asarray(frames, dtype=np.float64).mean(axis=0)
        norm = np.linalg.norm(pooled)
        if norm == 0.0:
            return 0.0
        return float(np.clip(self.embed_text(text) @ (pooled / norm), -1.0, 1.0))


_REGISTRY = {
    LexicalHashEncoder.name: LexicalHashEncoder,
}


def available_models() -> list[str]:
    return sorted(_REGISTRY)


def load_encoder(model: str, dim: int = 256):
    factory = _REGISTRY.get(model)
    if factory is None:
        raise LookupError(
            f"unknown model {model!r}; available: {', '.join(available_models())}")
    return factory(dim=dim)
