"""Encoder-agnostic video-language retrieval with keyword repetition.

The engine retrieves videos for captions (and captions for videos) in
two stages, watches how a candidate's clip "voters" agree, and appends
a caption's own nouns and verbs before re-ranking whenever the voters'
matching entropy crosses a threshold.
"""

from .core import EngineConfig, EmbeddingVector, cosine_similarity, l2_normalize, softmax
from .errors import EngineError
from .gar import FrameSet, Title, build_title, select_frame, word_frame_relevance
from .manifest import DatasetManifest, load_manifest
from .objectives import (
    FeatureBatch,
    MatchLogits,
    MomentumQueue,
    TrainingCorpus,
    finite_diff_check,
    ftm_loss,
    total_loss,
    train_linear_towers,
    vcc_loss,
    vcm_loss,
)
from .providers import FileProvider, MatchScorer, RemoteProvider, SyntheticProvider
from .repetition import (
    AugmentedCaption,
    ClipSet,
    MEReport,
    ScoreMatrix,
    augment_caption,
    collect_votes,
    matching_entropy,
    repetition_pipeline,
    segment_clips,
    should_repeat,
)
from .retrieval import RetrievalRun, candidate_select, evaluate, recall_at_n, rerank
from .store import EmbeddingStore
from .tagger import Caption, Lexicon, default_lexicon, extract_keywords, tokenize

__version__ = "0.1.0"

__all__ = [
    "AugmentedCaption",
    "Caption",
    "ClipSet",
    "DatasetManifest",
    "EmbeddingStore",
    "EmbeddingVector",
    "EngineConfig",
    "EngineError",
    "FeatureBatch",
    "FileProvider",
    "FrameSet",
    "Lexicon",
    "MEReport",
    "MatchLogits",
    "MatchScorer",
    "MomentumQueue",
    "RemoteProvider",
    "RetrievalRun",
    "ScoreMatrix",
    "SyntheticProvider",
    "Title",
    "TrainingCorpus",
    "augment_caption",
    "build_title",
    "candidate_select",
    "collect_votes",
    "cosine_similarity",
    "default_lexicon",
    "evaluate",
    "extract_keywords",
    "finite_diff_check",
    "ftm_loss",
    "l2_normalize",
    "load_manifest",
    "matching_entropy",
    "recall_at_n",
    "repetition_pipeline",
    "rerank",
    "segment_clips",
    "select_frame",
    "should_repeat",
    "softmax",
    "tokenize",
    "total_loss",
    "train_linear_towers",
    "vcc_loss",
    "vcm_loss",
    "word_frame_relevance",
]
