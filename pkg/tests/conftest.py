"""Shared fixtures: lexicons, fixture embedders, and tiny datasets."""
from __future__ import annotations

import numpy as np
import pytest

from refrain.core import EngineConfig
from refrain.dataset import build_eval_dataset
from refrain.manifest import DatasetManifest, ManifestRecord
from refrain.providers import MatchScorer, SyntheticProvider
from refrain.tagger import default_lexicon


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


class TableEmbedder:
    """Maps exact texts to fixed directions; unknown texts share one.

    Used to construct scenarios where specific words dominate the
    keyword-vs-frame relevance scores.
    """

    def __init__(self, dim: int, table: dict[str, int], default_axis: int = 1):
        self.dim = dim
        self.table = dict(table)
        self.default_axis = default_axis

    def _axis(self, index: int) -> np.ndarray:
        vec = np.zeros(self.dim)
        vec[index] = 1.0
        return vec

    def __call__(self, texts):
        return np.stack([
            self._axis(self.table.get(t, self.default_axis)) for t in texts
        ])


@pytest.fixture
def table_embedder():
    return TableEmbedder


def make_identity_manifest(n: int, tokens_per_caption: int = 4) -> DatasetManifest:
    """n videos whose frames repeat their own caption text verbatim."""
    rng = np.random.default_rng(99)
    vocab = [f"w{idx}" for idx in range(n * tokens_per_caption)]
    rng.shuffle(vocab)
    records = []
    for i in range(n):
        words = vocab[i * tokens_per_caption:(i + 1) * tokens_per_caption]
        caption = " ".join(words)
        records.append(ManifestRecord(video_id=f"v{i:03d}",
                                      frames=(caption,) * 4,
                                      captions=(caption,), split="test"))
    return DatasetManifest(records=tuple(records))


@pytest.fixture
def identity_setup():
    """64 planted-alignment pairs through the synthetic provider."""
    manifest = make_identity_manifest(64)
    provider = SyntheticProvider(seed=3, dim=64)
    config = EngineConfig(candidates=16, frames_per_video=4, rng_seed=3)
    dataset = build_eval_dataset(manifest, provider, config)
    return dataset, config, MatchScorer(provider)
