"""Two-stage retrieve-then-rerank inference and Recall@N evaluation.

Stage 1 selects the top-k gallery entries by cosine similarity against
a single query vector (exhaustive scan).  Stage 2 reorders those
candidates by a match score.  Every ranking breaks ties to the lowest
index so runs are reproducible across platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EngineConfig, l2_normalize
from .dataset import EvalDataset
from .errors import (
    EmptyInputError,
    InsufficientGalleryError,
    RankOutOfRangeError,
    ScorerError,
)

T2V = "t2v"
V2T = "v2t"


@dataclass(frozen=True)
class RetrievalRun:
    """Ranked candidates, ground truth, and the recall table for one run."""

    direction: str
    query_ids: tuple[str, ...]
    ranked: tuple[tuple[int, ...], ...]
    truths: tuple[int, ...]
    recall: dict[int, float]


def candidate_select(query_embedding, gallery, k: int) -> list[int]:
    """Indices of the k most similar gallery rows, best first.

    Exhaustive cosine scan; ties break to the lowest gallery index.
    """
    g = np.asarray(gallery, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] == 0:
        raise EmptyInputError("gallery must be a non-empty matrix")
    if k < 1 or k > g.shape[0]:
        raise InsufficientGalleryError(
            f"requested k={k} from a gallery of {g.shape[0]}")
    q = l2_normalize(query_embedding).values
    norms = np.linalg.norm(g, axis=1)
    sims = np.clip((g @ q) / np.where(norms == 0.0, 1.0, norms), -1.0, 1.0)
    order = np.lexsort((np.arange(g.shape[0]), -sims))
    return [int(i) for i in order[:k]]


def rerank(query, candidate_ids, score_fn) -> list[int]:
    """Reorder candidates by descending match score.

    ``score_fn(query, candidate_id)`` supplies the score; ties keep the
    candidates' stage-1 order.  A scorer exception surfaces as
    ScorerError carrying the candidate id.
    """
    ids = list(candidate_ids)
    if not ids:
        raise EmptyInputError("no candidates to rerank")
    scores = np.empty(len(ids))
    for pos, cid in enumerate(ids):
        try:
            scores[pos] = float(score_fn(query, cid))
        except ScorerError:
            raise
        except Exception as exc:
            raise ScorerError(cid, str(exc)) from exc
    order = np.lexsort((np.arange(len(ids)), -scores))
    return [ids[i] for i in order]


def recall_at_n(run: RetrievalRun, n: int) -> float:
    """Fraction of queries whose ground truth appears in the top n."""
    if n < 1:
        raise RankOutOfRangeError(f"rank must be >= 1, got {n}")
    for qid, ranked in zip(run.query_ids, run.ranked):
        if n > len(ranked):
            raise RankOutOfRangeError(
                f"rank {n} exceeds ranked-list length {len(ranked)} for {qid}")
    hits = sum(1 for ranked, truth in zip(run.ranked, run.truths)
               if truth in ranked[:n])
    return hits / len(run.ranked)


def make_run(direction: str, query_ids, ranked, truths,
             recall_ranks) -> RetrievalRun:
    """Assemble a RetrievalRun and fill its recall table."""
    run = RetrievalRun(direction=direction,
                       query_ids=tuple(query_ids),
                       ranked=tuple(tuple(int(i) for i in r) for r in ranked),
                       truths=tuple(int(t) for t in truths),
                       recall={})
    for n in recall_ranks:
        run.recall[int(n)] = recall_at_n(run, int(n))
    return run


def evaluate(dataset: EvalDataset, config: EngineConfig, scorer,
             direction: str = T2V) -> RetrievalRun:
    """Baseline two-stage retrieval over a prepared dataset.

    ``t2v`` queries every caption against the pooled video gallery;
    ``v2t`` queries every video against one caption per video.  The
    candidate budget clamps to the gallery size for small galleries.
    """
    if direction == T2V:
        gallery = dataset.video_matrix()
        k = min(config.candidates, gallery.shape[0])
        query_ids, ranked, truths = [], [], []
        for item in dataset.captions:
            cands = candidate_select(item.embedding, gallery, k)

            def score_fn(query, cid, _scorer=scorer, _ds=dataset):
                return _scorer.score(query.caption.text, _ds.videos[cid].frames)

            ranked.append(rerank(item, cands, score_fn))
            query_ids.append(item.qid)
            truths.append(item.video_index)
        return make_run(T2V, query_ids, ranked, truths, config.recall_ranks)

    if direction == V2T:
        gallery_indices = dataset.v2t_gallery()
        gallery = dataset.v2t_caption_matrix()
        k = min(config.candidates, gallery.shape[0])
        query_ids, ranked, truths = [], [], []
        for index, video in enumerate(dataset.videos):
            cands = candidate_select(video.vector, gallery, k)

            def score_fn(query, cid, _scorer=scorer, _ds=dataset,
                         _gallery=gallery_indices):
                caption = _ds.captions[_gallery[cid]].caption
                return _scorer.score(caption.text, query.frames)

            ranked.append(rerank(video, cands, score_fn))
            query_ids.append(video.video_id)
            truths.append(index)
        return make_run(V2T, query_ids, ranked, truths, config.recall_ranks)

    raise ValueError(f"direction must be '{T2V}' or '{V2T}', got {direction!r}")
