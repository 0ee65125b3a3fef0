"""Embedding and match-score providers.

Three interchangeable backends feed the engine:

* :class:`SyntheticProvider` — deterministic hashed bag-of-words
  embeddings, the offline stand-in used by tests and benchmarks,
* :class:`FileProvider` — precomputed stores keyed by content hash,
* :class:`RemoteProvider` — HTTP client for the shared wire protocol
  (``POST <endpoint>/api`` with ``{"op": ..., "items": [...]}``).

All three expose ``dim``, ``embed_text``, ``embed_frames`` and
``match``; :class:`MatchScorer` adapts any of them to the
``score(text, frames)`` contract the retrieval stages consume, with a
per-text embedding cache.
"""
from __future__ import annotations

import hashlib
import json
import time

import numpy as np
import requests

from .core import l2_normalize, mean_pool
from .errors import (
    ProtocolError,
    ProviderUnavailableError,
    StoreIncompleteError,
    ZeroVectorError,
)
from .gar import FrameSet
from .store import EmbeddingStore
from .tagger import tokenize

_REMOTE_NORM_TOL = 1e-4


def text_key(text: str) -> str:
    """Content-hash key used by the store-backed provider."""
    return hashlib.sha1(text.encode("utf-8")).hexdigest()


def _frames_matrix(frames) -> np.ndarray:
    if isinstance(frames, FrameSet):
        return frames.frames
    return np.asarray(frames, dtype=np.float64)


def _pooled_match(text_vector: np.ndarray, frames) -> float:
    """Cosine of the text vector against the pooled frame vector.

    Degenerate frame sets whose mean cancels to zero score 0.0 rather
    than erroring, keeping scorers total.
    """
    matrix = _frames_matrix(frames)
    try:
        pooled = mean_pool(matrix)
    except ZeroVectorError:
        return 0.0
    return float(np.clip(np.dot(text_vector, pooled), -1.0, 1.0))


class SyntheticProvider:
    """Seeded hashed bag-of-words embedder.

    Each token hashes (together with the seed) to a fixed Gaussian
    direction; a text embeds as the normalized sum of its token vectors,
    counted with multiplicity.  Identical inputs give identical outputs
    across processes, and token-overlapping texts land closer together
    than disjoint ones.
    """

    def __init__(self, seed: int = 0, dim: int = 64):
        self.seed = int(seed)
        self.dim = int(dim)
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                f"{self.seed}:{token}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim)
            self._token_cache[token] = vec
        return vec

    def _embed_one(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise ZeroVectorError(f"no tokens to embed in {text!r}")
        total = np.zeros(self.dim)
        for token in tokens:
            total += self._token_vector(token)
        return l2_normalize(total).values

    def embed_text(self, texts) -> np.ndarray:
        return np.stack([self._embed_one(t) for t in texts])

    def embed_frames(self, descriptors) -> np.ndarray:
        # Frame descriptors are treated as text describing the frame.
        return self.embed_text(descriptors)

    def match(self, text: str, frames) -> float:
        return _pooled_match(self._embed_one(text), frames)


class FileProvider:
    """Serves precomputed embeddings from stores, keyed by content hash.

    Novel texts (anything the ``embed`` run did not cover) raise
    StoreIncompleteError rather than silently degrading.
    """

    def __init__(self, text_store: EmbeddingStore, frame_store: EmbeddingStore):
        if text_store.dim != frame_store.dim:
            raise ProtocolError(
                f"store dims differ: text {text_store.dim}, frames {frame_store.dim}"
            )
        self._text = text_store
        self._frames = frame_store
        self.dim = text_store.dim

    def _lookup(self, store: EmbeddingStore, text: str) -> np.ndarray:
        key = text_key(text)
        if key not in store:
            raise StoreIncompleteError(
                f"no stored embedding for {text[:60]!r} (key {key[:12]})"
            )
        return store.get(key)

    def embed_text(self, texts) -> np.ndarray:
        return np.stack([self._lookup(self._text, t) for t in texts])

    def embed_frames(self, descriptors) -> np.ndarray:
        return np.stack([self._lookup(self._frames, d) for d in descriptors])

    def match(self, text: str, frames) -> float:
        return _pooled_match(self._lookup(self._text, text), frames)


class RemoteProvider:
    """HTTP client for the shared wire protocol.

    Requests are batched (``batch_size`` items per call) and retried
    with linear backoff; every call is idempotent.  Responses are
    checked for the declared dimension and unit-norm vectors before the
    engine trusts them.
    """

    def __init__(self, endpoint: str, batch_size: int = 64, retries: int = 3,
                 backoff: float = 0.1, timeout: float = 10.0, session=None):
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = int(batch_size)
        self.retries = int(retries)
        self.backoff = float(backoff)
        self.timeout = float(timeout)
        self._session = session or requests.Session()
        health = self._request_json("GET", f"{self.endpoint}/health")
        try:
            self.dim = int(health["dim"])
            self.model = str(health["model"])
        except (KeyError, TypeError, ValueError):
            raise ProtocolError(f"bad health response: {health!r}")

    def _request_json(self, method: str, url: str, payload=None):
        last_exc = None
        for attempt in range(self.retries + 1):
            try:
                if method == "GET":
                    resp = self._session.get(url, timeout=self.timeout)
                else:
                    resp = self._session.post(url, json=payload,
                                              timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
                continue
            try:
                body = resp.json()
            except (ValueError, json.JSONDecodeError):
                raise ProtocolError(
                    f"non-JSON response ({resp.status_code}) from {url}")
            if isinstance(body, dict) and "error" in body:
                raise ProtocolError(
                    f"server error {body.get('error')!r}: {body.get('message')}")
            if resp.status_code != 200:
                raise ProtocolError(f"HTTP {resp.status_code} from {url}")
            return body
        raise ProviderUnavailableError(
            f"endpoint {self.endpoint} unreachable after "
            f"{self.retries + 1} attempts: {last_exc}")

    def _check_vectors(self, body, expected: int) -> np.ndarray:
        try:
            dim = int(body["dim"])
            vectors = np.asarray(body["vectors"], dtype=np.float64)
        except (KeyError, TypeError, ValueError):
            raise ProtocolError(f"malformed vector response: {body!r}")
        if dim != self.dim or vectors.ndim != 2 or vectors.shape != (expected, self.dim):
            raise ProtocolError(
                f"expected {expected} vectors of dim {self.dim}, "
                f"got dim={dim} shape={vectors.shape}")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > _REMOTE_NORM_TOL):
            raise ProtocolError("server returned non-normalized vectors")
        return vectors

    def _embed(self, op: str, items) -> np.ndarray:
        items = list(items)
        chunks = []
        for start in range(0, len(items), self.batch_size):
            chunk = items[start:start + self.batch_size]
            body = self._request_json("POST", f"{self.endpoint}/api",
                                      {"op": op, "items": chunk})
            chunks.append(self._check_vectors(body, len(chunk)))
        return np.concatenate(chunks) if chunks else np.zeros((0, self.dim))

    def embed_text(self, texts) -> np.ndarray:
        return self._embed("embed_text", texts)

    def embed_frames(self, descriptors) -> np.ndarray:
        return self._embed("embed_frames", descriptors)

    def match(self, text: str, frames) -> float:
        matrix = _frames_matrix(frames)
        item = {"text": text, "frames": matrix.tolist()}
        body = self._request_json("POST", f"{self.endpoint}/api",
                                  {"op": "match", "items": [item]})
        try:
            scores = body["scores"]
            score = float(scores[0])
        except (KeyError, TypeError, ValueError, IndexError):
            raise ProtocolError(f"malformed match response: {body!r}")
        if len(scores) != 1 or not np.isfinite(score):
            raise ProtocolError(f"expected one finite score, got {scores!r}")
        return score


class MatchScorer:
    """Adapts a provider to ``score(text, frames)`` with a text cache.

    The cache makes repeated scoring of one caption against many clip
    variants cheap; it never changes results because providers are
    deterministic.
    """

    def __init__(self, provider):
        self.provider = provider
        self._cache: dict[str, np.ndarray] = {}

    def text_vector(self, text: str) -> np.ndarray:
        vec = self._cache.get(text)
        if vec is None:
            vec = np.asarray(self.provider.embed_text([text])[0], dtype=np.float64)
            self._cache[text] = vec
        return vec

    def score(self, text: str, frames) -> float:
        if hasattr(self.provider, "match"):
            # Reuse the cached text vector for pooled-cosine providers.
            if isinstance(self.provider, (SyntheticProvider, FileProvider)):
                return _pooled_match(self.text_vector(text), frames)
            return float(self.provider.match(text, frames))
        return _pooled_match(self.text_vector(text), frames)
