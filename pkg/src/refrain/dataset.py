"""Assembles a manifest plus a provider into evaluation-ready data.

Frame descriptors are sampled uniformly by index down to the configured
frames-per-video budget, embedded, and pooled into one video-level
vector for the candidate-selection stage.  Captions are tokenized,
tagged, and embedded up front.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EngineConfig, mean_pool
from .errors import ValidationError
from .gar import FrameSet
from .manifest import DatasetManifest
from .tagger import Caption, Lexicon, default_lexicon


@dataclass(frozen=True)
class VideoItem:
    video_id: str
    frames: FrameSet
    vector: np.ndarray  # pooled, unit-norm


@dataclass(frozen=True)
class CaptionItem:
    qid: str
    caption: Caption
    embedding: np.ndarray
    video_index: int


@dataclass(frozen=True)
class EvalDataset:
    videos: tuple[VideoItem, ...]
    captions: tuple[CaptionItem, ...]

    def video_matrix(self) -> np.ndarray:
        return np.stack([v.vector for v in self.videos])

    def v2t_gallery(self) -> tuple[int, ...]:
        """Caption indices forming the video-to-text gallery.

        One caption per video (its first), ordered like ``videos``, so
        the ground-truth caption for video i sits at gallery position i.
        Requires every gallery video to carry at least one caption.
        """
        first: dict[int, int] = {}
        for idx, item in enumerate(self.captions):
            first.setdefault(item.video_index, idx)
        missing = [v.video_id for i, v in enumerate(self.videos) if i not in first]
        if missing:
            raise ValidationError(
                f"v2t needs a caption for every video; missing: {missing[:5]}")
        return tuple(first[i] for i in range(len(self.videos)))

    def v2t_caption_matrix(self) -> np.ndarray:
        return np.stack([self.captions[i].embedding for i in self.v2t_gallery()])


def sample_uniform(items: list, limit: int) -> list:
    """Up to ``limit`` items picked uniformly by index, order preserved."""
    if len(items) <= limit:
        return list(items)
    idx = np.round(np.linspace(0, len(items) - 1, limit)).astype(int)
    return [items[i] for i in idx]


def build_eval_dataset(manifest: DatasetManifest, provider,
                       config: EngineConfig,
                       lexicon: Lexicon | None = None,
                       split: str = "test",
                       include_train_gallery: bool = False) -> EvalDataset:
    """Embed a manifest split into an EvalDataset.

    With ``include_train_gallery`` the train split's videos join the
    gallery as distractors without contributing caption queries.
    """
    lexicon = lexicon or default_lexicon()
    records = list(manifest.split_records(split))
    query_count = len(records)
    if include_train_gallery and split == "test":
        records.extend(manifest.train_records)
    videos: list[VideoItem] = []
    captions: list[CaptionItem] = []
    caption_texts: list[str] = []
    caption_meta: list[tuple[str, str, int]] = []

    for index, record in enumerate(records):
        descriptors = sample_uniform(list(record.frames), config.frames_per_video)
        frame_vectors = provider.embed_frames(descriptors)
        frames = FrameSet(record.video_id, frame_vectors)
        videos.append(VideoItem(video_id=record.video_id, frames=frames,
                                vector=mean_pool(frames.frames)))
        if index >= query_count:
            continue  # gallery-only distractor
        for c_index, text in enumerate(record.captions):
            caption_texts.append(text)
            caption_meta.append((f"{record.video_id}#c{c_index}", text, index))

    embeddings = provider.embed_text(caption_texts) if caption_texts else []
    for (qid, text, video_index), vector in zip(caption_meta, embeddings):
        caption = Caption.from_text(qid, text, lexicon)
        captions.append(CaptionItem(qid=qid, caption=caption,
                                    embedding=np.asarray(vector, dtype=np.float64),
                                    video_index=video_index))
    return EvalDataset(videos=tuple(videos), captions=tuple(captions))
