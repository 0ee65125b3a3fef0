"""Shared numeric primitives and engine configuration.

All similarity math in the engine runs on L2-normalized float64 vectors.
The helpers here are pure functions on immutable inputs and are safe to
call concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidTemperatureError,
    ValidationError,
    ZeroVectorError,
)

NORM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-dimension real vector, optionally guaranteed unit-norm."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise EmptyInputError("embedding must be a non-empty 1-D vector")
        object.__setattr__(self, "values", arr)
        if self.normalized:
            norm = float(np.linalg.norm(arr))
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise ValidationError(
                    f"vector flagged normalized has norm {norm:.8f}"
                )

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def as_array(v) -> np.ndarray:
    """Coerce an EmbeddingVector or array-like to a float64 ndarray."""
    if isinstance(v, EmbeddingVector):
        return v.values
    return np.asarray(v, dtype=np.float64)


def l2_normalize(v) -> EmbeddingVector:
    """Scale a vector to unit Euclidean norm, preserving direction.

    Raises ZeroVectorError for an all-zero input.
    """
    arr = as_array(v)
    if arr.size == 0:
        raise EmptyInputError("cannot normalize an empty vector")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ZeroVectorError("cannot normalize the zero vector")
    return EmbeddingVector(arr / norm, normalized=True)


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """L2-normalize each row of a matrix; zero rows raise ZeroVectorError."""
    m = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroVectorError("matrix contains an all-zero row")
    return m / norms


def cosine_similarity(a, b) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1].

    Inputs are normalized internally, so callers may pass raw vectors.
    """
    av, bv = as_array(a), as_array(b)
    if av.shape != bv.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: {av.shape} vs {bv.shape}"
        )
    na = l2_normalize(av).values
    nb = l2_normalize(bv).values
    return float(np.clip(np.dot(na, nb), -1.0, 1.0))


def softmax(logits, tau: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction for stability."""
    arr = as_array(logits)
    if arr.size == 0:
        raise EmptyInputError("softmax of an empty vector")
    if tau <= 0.0:
        raise InvalidTemperatureError(f"temperature must be > 0, got {tau}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("softmax requires finite logits")
    scaled = arr / tau
    scaled = scaled - scaled.max()
    exps = np.exp(scaled)
    return exps / exps.sum()


def argmax_with_tiebreak(values) -> int:
    """Index of the maximum, ties broken to the lowest index."""
    arr = as_array(values)
    if arr.size == 0:
        raise EmptyInputError("argmax of an empty vector")
    # np.argmax already returns the first occurrence of the maximum.
    return int(np.argmax(arr))


def mean_pool(rows: np.ndarray) -> np.ndarray:
    """Mean of a set of row vectors, re-normalized to unit length."""
    m = np.asarray(rows, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise EmptyInputError("mean_pool needs at least one row")
    return l2_normalize(m.mean(axis=0)).values


@dataclass(frozen=True)
class EngineConfig:
    """Tunable knobs for retrieval, voting, and training.

    Defaults are desk-scale; every field can be overridden via config
    file or CLI flag.
    """

    temperature: float = 0.07
    queue_size: int = 1024
    candidates: int = 16
    clips: int = 3
    me_threshold: float = 0.0
    title_nouns: int = 2
    title_verbs: int = 2
    frames_per_video: int = 8
    recall_ranks: tuple[int, ...] = (1, 5, 10)
    rng_seed: int = 0
    min_clip_frames: int = 1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValidationError("temperature must be > 0")
        if self.queue_size < 1:
            raise ValidationError("queue_size must be >= 1")
        if self.clips < 1:
            raise ValidationError("clips must be >= 1")
        if self.me_threshold < 0:
            raise ValidationError("me_threshold must be >= 0")
        if self.title_nouns < 1 or self.title_verbs < 1:
            raise ValidationError("title_nouns and title_verbs must be >= 1")
        if self.frames_per_video < 1:
            raise ValidationError("frames_per_video must be >= 1")
        if self.min_clip_frames < 1:
            raise ValidationError("min_clip_frames must be >= 1")
        ranks = tuple(int(n) for n in self.recall_ranks)
        if not ranks or any(n < 1 for n in ranks):
            raise ValidationError("recall_ranks must be positive integers")
        object.__setattr__(self, "recall_ranks", ranks)
        if self.candidates < max(ranks):
            raise ValidationError(
                "candidates must be >= max(recall_ranks)"
            )

    def with_overrides(self, **kwargs) -> "EngineConfig":
        """Return a copy with the given non-None fields replaced."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates) if updates else self


_CONFIG_PARSERS = {
    "temperature": float,
    "queue_size": int,
    "candidates": int,
    "clips": int,
    "me_threshold": float,
    "title_nouns": int,
    "title_verbs": int,
    "frames_per_video": int,
    "recall_ranks": lambda s: tuple(int(p) for p in s.split(",") if p.strip()),
    "rng_seed": int,
    "min_clip_frames": int,
}


def load_config(path) -> EngineConfig:
    """Parse a flat ``key = value`` config file into an EngineConfig.

    Lines starting with ``#`` and blank lines are ignored.  Unknown keys
    are rejected so typos fail loudly.
    """
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"expected 'key = value', got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise ValidationError(f"unknown config key {key!r}", line=lineno)
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ValidationError(f"bad value for {key}: {exc}", line=lineno)
    return EngineConfig(**values)


def config_field_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(EngineConfig))
