"""Entropy-gated caption augmentation over clip voters.

Each stage-2 candidate video is cut into ``w`` clips; the full video
plus its clips act as ``w + 1`` voters, each voting (argmax of match
score) for the candidate it thinks answers the query.  The Shannon
entropy of the vote histogram measures voter agreement: zero means
unanimity, ``ln(w + 1)`` total disagreement.  Queries whose entropy
exceeds the threshold get their own noun/verb keywords appended to the
caption and only the rerank stage runs again; everything else keeps the
baseline ranking bit-for-bit.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import EngineConfig, argmax_with_tiebreak
from .dataset import EvalDataset
from .errors import EmptyInputError, ScorerError, ValidationError
from .gar import FrameSet
from .retrieval import T2V, V2T, RetrievalRun, candidate_select, make_run, rerank
from .tagger import NOUN, VERB, Caption, Lexicon, default_lexicon, tag_tokens

MODE_TARGET = "target"
MODE_ALL = "all"


def uniform_segmenter(frame_count: int, clips: int) -> list[tuple[int, int]]:
    """Split ``frame_count`` frames into up to ``clips`` contiguous spans."""
    if frame_count < 1:
        raise EmptyInputError("cannot segment an empty frame sequence")
    parts = min(clips, frame_count)
    bounds = np.linspace(0, frame_count, parts + 1).round().astype(int)
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(parts)]


@dataclass(frozen=True)
class ClipSet:
    """`clips + 1` frame-set variants of one video; variant 0 is the full video."""

    video_id: str
    variants: tuple[FrameSet, ...]

    def __post_init__(self):
        if len(self.variants) < 2:
            raise ValidationError("a ClipSet needs the original plus >= 1 clip")

    @property
    def clips(self) -> int:
        return len(self.variants) - 1


def segment_clips(frames: FrameSet, clips: int, min_clip_frames: int = 1,
                  segmenter=None) -> ClipSet:
    """Cut a video into clip variants for voting.

    The boundary provider proposes contiguous spans; spans shorter than
    ``min_clip_frames`` merge into their left neighbor (the leading span
    merges right).  More than ``clips`` spans truncate to the first
    ``clips``; fewer pad with copies of the full video.
    """
    if frames.count < 1:
        raise EmptyInputError("cannot segment an empty video")
    if clips < 1:
        raise ValidationError("clips must be >= 1")
    segmenter = segmenter or uniform_segmenter
    spans = [(int(a), int(b)) for a, b in segmenter(frames.count, clips)]
    if not spans:
        raise ValidationError("segmenter proposed no spans")
    for start, stop in spans:
        if start < 0 or stop > frames.count:
            raise ValidationError(
                f"segmenter span ({start}, {stop}) exceeds {frames.count} frames")

    merged: list[tuple[int, int]] = []
    for start, stop in spans:
        if stop <= start:
            continue
        if merged and (stop - start) < min_clip_frames:
            merged[-1] = (merged[-1][0], stop)
        else:
            merged.append((start, stop))
    if not merged:
        raise ValidationError("segmenter spans were all empty")
    if len(merged) > 1 and (merged[0][1] - merged[0][0]) < min_clip_frames:
        first, second = merged[0], merged[1]
        merged[:2] = [(first[0], second[1])]

    merged = merged[:clips]
    variants = [frames]
    variants.extend(frames.slice(a, b) for a, b in merged)
    while len(variants) < clips + 1:
        variants.append(frames)
    return ClipSet(video_id=frames.video_id, variants=tuple(variants))


@dataclass(frozen=True)
class ScoreMatrix:
    """k candidates x (clips + 1) voter variants of match scores."""

    scores: np.ndarray  # (k, w + 1)
    candidate_ids: tuple[int, ...]

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] == 0 or s.shape[1] < 2:
            raise ValidationError("score matrix must be (k, w + 1) with w >= 1")
        if not np.all(np.isfinite(s)):
            raise ValidationError("score matrix entries must be finite")
        if len(self.candidate_ids) != s.shape[0]:
            raise ValidationError("one candidate id per matrix row required")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def transposed(self) -> np.ndarray:
        """Voter-major view: row j holds voter j's score per candidate."""
        return self.scores.T


def build_score_matrix(caption_text: str, clip_sets, scorer) -> ScoreMatrix:
    """Score a caption against every variant of every candidate."""
    clip_sets = list(clip_sets)
    if not clip_sets:
        raise EmptyInputError("no candidates to score")
    width = clip_sets[0].clips + 1
    if any(cs.clips + 1 != width for cs in clip_sets):
        raise ValidationError("candidates disagree on clip count")
    rows = []
    ids = []
    for row_index, clip_set in enumerate(clip_sets):
        row = []
        for variant in clip_set.variants:
            try:
                row.append(float(scorer.score(caption_text, variant)))
            except ScorerError:
                raise
            except Exception as exc:
                raise ScorerError(clip_set.video_id, str(exc)) from exc
        rows.append(row)
        ids.append(row_index)
    return ScoreMatrix(scores=np.asarray(rows), candidate_ids=tuple(ids))


def collect_votes(matrix: ScoreMatrix) -> list[int]:
    """Each voter's argmax candidate row, ties to the lowest row."""
    transposed = matrix.transposed()
    return [argmax_with_tiebreak(voter_row) for voter_row in transposed]


def matching_entropy(votes) -> float:
    """Shannon entropy (nats) of the vote histogram.

    Counts collapse to distinct vote values; each distinct value
    contributes ``p = count / len(votes)``.  Zero iff the votes are
    unanimous, at most ``ln(len(votes))``.
    """
    votes = list(votes)
    if not votes:
        raise EmptyInputError("no votes to score")
    counts = Counter(votes)
    total = len(votes)
    return float(-sum((c / total) * math.log(c / total) for c in counts.values()))


def should_repeat(me: float, delta: float) -> bool:
    """Strict gate: augment only when entropy exceeds the threshold."""
    if me < 0:
        raise ValidationError(f"matching entropy must be >= 0, got {me}")
    return me > delta


@dataclass(frozen=True)
class AugmentedCaption:
    original: Caption
    keywords: tuple[str, ...]
    augmented_text: str


def augment_caption(caption: Caption, lexicon: Lexicon) -> AugmentedCaption:
    """Append the caption's own nouns and verbs as a comma-separated suffix.

    Keywords keep caption order (first occurrence); a caption without
    keywords comes back textually unchanged.
    """
    tags = caption.tags
    if len(tags) != len(caption.tokens):
        tags = tag_tokens(caption.tokens, lexicon)
    keywords: list[str] = []
    seen: set[str] = set()
    for token, tag in zip(caption.tokens, tags):
        if token in seen:
            continue
        seen.add(token)
        if tag in (NOUN, VERB):
            keywords.append(token)
    if keywords:
        text = f"{caption.text} {', '.join(keywords)}"
    else:
        text = caption.text
    return AugmentedCaption(original=caption, keywords=tuple(keywords),
                            augmented_text=text)


@dataclass(frozen=True)
class MEReport:
    """Vote histogram, entropy value, and the gate decision for one query."""

    votes: tuple[int, ...]
    histogram: dict[int, int]
    me_value: float
    triggered: bool


@dataclass(frozen=True)
class QueryDiagnostic:
    """Everything the diagnostics file records about one query."""

    qid: str
    candidate_ids: tuple[int, ...]
    report: MEReport
    pre_rank: int | None
    post_rank: int | None


def _rank_of(ranked: list[int], truth: int) -> int | None:
    try:
        return ranked.index(truth) + 1
    except ValueError:
        return None


def _make_report(votes, me: float, triggered: bool) -> MEReport:
    return MEReport(votes=tuple(int(v) for v in votes),
                    histogram=dict(sorted(Counter(int(v) for v in votes).items())),
                    me_value=me, triggered=triggered)


def repetition_pipeline(dataset: EvalDataset, config: EngineConfig, scorer,
                        lexicon: Lexicon | None = None, segmenter=None,
                        mode: str = MODE_TARGET, direction: str = T2V
                        ) -> tuple[RetrievalRun, list[QueryDiagnostic]]:
    """Run retrieval with entropy-gated caption augmentation.

    Stage-1 candidates are fixed once per query; only the rerank stage
    re-runs with the augmented caption.  ``mode='target'`` gates on the
    entropy threshold, ``mode='all'`` augments every query (the ablation
    arm).  Queries that do not trigger keep a ranking bit-identical to
    :func:`refrain.retrieval.evaluate`.
    """
    if mode not in (MODE_TARGET, MODE_ALL):
        raise ValidationError(f"mode must be 'target' or 'all', got {mode!r}")
    lexicon = lexicon or default_lexicon()
    delta = config.me_threshold

    clip_cache: dict[int, ClipSet] = {}

    def clips_for(video_index: int) -> ClipSet:
        clip_set = clip_cache.get(video_index)
        if clip_set is None:
            clip_set = segment_clips(dataset.videos[video_index].frames,
                                     config.clips, config.min_clip_frames,
                                     segmenter)
            clip_cache[video_index] = clip_set
        return clip_set

    query_ids: list[str] = []
    ranked_lists: list[list[int]] = []
    truths: list[int] = []
    diagnostics: list[QueryDiagnostic] = []

    if direction == T2V:
        gallery = dataset.video_matrix()
        k = min(config.candidates, gallery.shape[0])
        for item in dataset.captions:
            cands = candidate_select(item.embedding, gallery, k)
            matrix = build_score_matrix(item.caption.text,
                                        [clips_for(j) for j in cands], scorer)
            votes = collect_votes(matrix)
            me = matching_entropy(votes)
            triggered = mode == MODE_ALL or should_repeat(me, delta)

            col0 = {cid: matrix.scores[row, 0]
                    for row, cid in enumerate(cands)}
            baseline = rerank(item, cands, lambda q, cid, _c=col0: _c[cid])
            if triggered:
                aug = augment_caption(item.caption, lexicon)

                def score_fn(query, cid, _scorer=scorer, _ds=dataset,
                             _text=aug.augmented_text):
                    return _scorer.score(_text, _ds.videos[cid].frames)

                final = rerank(item, cands, score_fn)
            else:
                final = baseline

            query_ids.append(item.qid)
            ranked_lists.append(final)
            truths.append(item.video_index)
            diagnostics.append(QueryDiagnostic(
                qid=item.qid, candidate_ids=tuple(cands),
                report=_make_report(votes, me, triggered),
                pre_rank=_rank_of(baseline, item.video_index),
                post_rank=_rank_of(final, item.video_index)))
        run = make_run(T2V, query_ids, ranked_lists, truths, config.recall_ranks)
        return run, diagnostics

    if direction == V2T:
        gallery_indices = dataset.v2t_gallery()
        gallery = dataset.v2t_caption_matrix()
        k = min(config.candidates, gallery.shape[0])
        augmented = {
            idx: augment_caption(dataset.captions[idx].caption, lexicon)
            for idx in gallery_indices
        }
        for index, video in enumerate(dataset.videos):
            cands = candidate_select(video.vector, gallery, k)
            # Voters are the query video's own variants; each scores all
            # candidate captions.
            query_clips = segment_clips(video.frames, config.clips,
                                        config.min_clip_frames, segmenter)
            rows = []
            for cid in cands:
                caption_text = dataset.captions[gallery_indices[cid]].caption.text
                try:
                    rows.append([float(scorer.score(caption_text, variant))
                                 for variant in query_clips.variants])
                except ScorerError:
                    raise
                except Exception as exc:
                    raise ScorerError(cid, str(exc)) from exc
            matrix = ScoreMatrix(scores=np.asarray(rows),
                                 candidate_ids=tuple(range(len(cands))))
            votes = collect_votes(matrix)
            me = matching_entropy(votes)
            triggered = mode == MODE_ALL or should_repeat(me, delta)

            col0 = {cid: matrix.scores[row, 0]
                    for row, cid in enumerate(cands)}
            baseline = rerank(video, cands, lambda q, cid, _c=col0: _c[cid])
            if triggered:
                def score_fn(query, cid, _scorer=scorer, _aug=augmented,
                             _gallery=gallery_indices):
                    return _scorer.score(_aug[_gallery[cid]].augmented_text,
                                         query.frames)

                final = rerank(video, cands, score_fn)
            else:
                final = baseline

            query_ids.append(video.video_id)
            ranked_lists.append(final)
            truths.append(index)
            diagnostics.append(QueryDiagnostic(
                qid=video.video_id, candidate_ids=tuple(cands),
                report=_make_report(votes, me, triggered),
                pre_rank=_rank_of(baseline, index),
                post_rank=_rank_of(final, index)))
        run = make_run(V2T, query_ids, ranked_lists, truths, config.recall_ranks)
        return run, diagnostics

    raise ValueError(f"direction must be '{T2V}' or '{V2T}', got {direction!r}")
