"""Granularity-aware representations: keyword titles and key frames.

Given a caption's noun/verb keywords and a video's frame embeddings,
this module scores each keyword against the frames (summed cosine over
all frames), keeps the best nouns and verbs as a short "title", and
picks the single frame closest to that title.  Titles and frames are
the fine-grained inputs used by the matching objective and the
diagnostics pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import argmax_with_tiebreak, as_array, l2_normalize, mean_pool
from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    EmptyTitleError,
    ZeroVectorError,
)
from .tagger import Caption, Lexicon, extract_keywords


@dataclass(frozen=True)
class FrameSet:
    """Ordered, L2-normalized frame embeddings for one video."""

    video_id: str
    frames: np.ndarray  # (m, D), unit rows

    def __post_init__(self):
        m = np.asarray(self.frames, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 1:
            raise EmptyInputError("FrameSet needs at least one frame row")
        norms = np.linalg.norm(m, axis=1)
        if np.any(norms == 0.0):
            raise ZeroVectorError("FrameSet contains an all-zero frame")
        if np.any(np.abs(norms - 1.0) > 1e-6):
            m = m / norms[:, None]
        m.setflags(write=False)
        object.__setattr__(self, "frames", m)

    @property
    def count(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    def pooled(self) -> np.ndarray:
        """Mean of the frame vectors, re-normalized."""
        return mean_pool(self.frames)

    def slice(self, start: int, stop: int) -> "FrameSet":
        return FrameSet(self.video_id, self.frames[start:stop])


@dataclass(frozen=True)
class Title:
    """Selected keywords in caption order plus their text embedding."""

    words: tuple[str, ...]
    text: str
    embedding: np.ndarray


def word_frame_relevance(word_embedding, frames: FrameSet) -> float:
    """Sum of cosine similarities between one word and every frame.

    The sum (not the mean) is intentional: a word supported by many
    frames outranks one supported by a single frame.
    """
    w = as_array(word_embedding)
    if w.shape[0] != frames.dim:
        raise DimensionMismatchError(
            f"word dim {w.shape[0]} != frame dim {frames.dim}"
        )
    wn = l2_normalize(w).values
    sims = np.clip(frames.frames @ wn, -1.0, 1.0)
    return float(sims.sum())


def _top_by_relevance(words: list[str], positions: dict[str, int],
                      scores: dict[str, float], limit: int) -> list[str]:
    # Highest score first; ties go to the earliest caption position.
    ranked = sorted(words, key=lambda w: (-scores[w], positions[w]))
    return ranked[:limit]


def build_title(caption: Caption, frames: FrameSet, embedder,
                title_nouns: int, title_verbs: int,
                lexicon: Lexicon | None = None) -> Title:
    """Select the top nouns and verbs by frame relevance, caption order.

    ``embedder`` maps a list of texts to unit-norm row vectors; single
    words go through it the same way as full captions.  Raises
    EmptyTitleError when the caption has no keywords at all; callers
    that need a total function can fall back to the full caption text.
    """
    if lexicon is None:
        from .tagger import default_lexicon

        lexicon = default_lexicon()
    nouns, verbs = extract_keywords(caption, lexicon)
    keywords = nouns + verbs
    if not keywords:
        raise EmptyTitleError(f"caption {caption.id!r} has no keywords")

    vectors = embedder(keywords)
    scores = {w: word_frame_relevance(vectors[i], frames)
              for i, w in enumerate(keywords)}
    positions = {w: caption.tokens.index(w) for w in keywords}

    chosen = set(_top_by_relevance(nouns, positions, scores, title_nouns))
    chosen |= set(_top_by_relevance(verbs, positions, scores, title_verbs))
    ordered = tuple(sorted(chosen, key=lambda w: positions[w]))

    text = " ".join(ordered)
    embedding = np.asarray(embedder([text])[0], dtype=np.float64)
    return Title(words=ordered, text=text, embedding=embedding)


def title_with_fallback(caption: Caption, frames: FrameSet, embedder,
                        title_nouns: int, title_verbs: int,
                        lexicon: Lexicon | None = None) -> Title:
    """build_title, falling back to the full caption when keyword-free."""
    try:
        return build_title(caption, frames, embedder, title_nouns,
                           title_verbs, lexicon=lexicon)
    except EmptyTitleError:
        embedding = np.asarray(embedder([caption.text])[0], dtype=np.float64)
        return Title(words=(), text=caption.text, embedding=embedding)


def select_frame(title: Title, frames: FrameSet) -> int:
    """Index of the frame most similar to the title embedding."""
    if frames.count == 0:
        raise EmptyInputError("empty FrameSet")
    t = l2_normalize(title.embedding).values
    if t.shape[0] != frames.dim:
        raise DimensionMismatchError(
            f"title dim {t.shape[0]} != frame dim {frames.dim}"
        )
    return argmax_with_tiebreak(frames.frames @ t)
