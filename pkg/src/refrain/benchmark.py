"""Seeded synthetic benchmark with planted voter disagreement.

The generator builds a retrieval set where the bag-of-words scorer
rewards keyword overlap, so appending a caption's own keywords shifts
scores in a controlled way:

* "clean" queries: the true video matches the whole caption (keywords
  plus filler words, filler-heavy), while a planted distractor video
  shows only the keywords.  Voters agree, the baseline ranks the truth
  first, and augmenting the caption drags it toward the distractor.
* "disagreement" queries: the true video mixes keyword-rich frames with
  junk frames, and a planted confuser matches only the filler words.
  The baseline ranks the confuser first, the clip voters split, and the
  augmented caption recovers the truth.

Gating augmentation on voter entropy therefore beats both the baseline
and augment-everything, which is exactly the ordering the acceptance
suite checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EngineConfig
from .manifest import DatasetManifest, ManifestRecord
from .providers import SyntheticProvider
from .tagger import NOUN, VERB, default_lexicon

DEFAULT_SEED = 20240811


@dataclass(frozen=True)
class BenchmarkSpec:
    n_queries: int = 100
    disagreement_fraction: float = 0.3
    dim: int = 512
    frames_per_video: int = 8
    fillers_per_caption: int = 6
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class Benchmark:
    manifest: DatasetManifest
    provider: SyntheticProvider
    config: EngineConfig
    clean_ids: tuple[str, ...]
    disagreement_ids: tuple[str, ...]


def _caption_words(rng: np.random.Generator, nouns: list[str],
                   verbs: list[str]) -> list[str]:
    n1, n2 = nouns.pop(), nouns.pop()
    v1, v2 = verbs.pop(), verbs.pop()
    return [n1, v1, n2, v2]


def generate_benchmark(spec: BenchmarkSpec | None = None) -> Benchmark:
    """Build the benchmark manifest, provider, and config."""
    spec = spec or BenchmarkSpec()
    rng = np.random.default_rng(spec.seed)
    lexicon = default_lexicon()
    noun_pool = lexicon.words(NOUN)
    verb_pool = lexicon.words(VERB)
    need = 2 * spec.n_queries
    if len(noun_pool) < need or len(verb_pool) < need:
        raise ValueError("bundled lexicon too small for the requested size")
    nouns = [noun_pool[i] for i in rng.permutation(len(noun_pool))[:need]]
    verbs = [verb_pool[i] for i in rng.permutation(len(verb_pool))[:need]]

    n_disagree = round(spec.n_queries * spec.disagreement_fraction)
    kinds = np.array(["disagree"] * n_disagree
                     + ["clean"] * (spec.n_queries - n_disagree))
    rng.shuffle(kinds)

    records: list[ManifestRecord] = []
    clean_ids: list[str] = []
    disagreement_ids: list[str] = []
    m = spec.frames_per_video

    for q in range(spec.n_queries):
        keywords = _caption_words(rng, nouns, verbs)
        fillers = [f"q{q}x{j}" for j in range(spec.fillers_per_caption)]
        caption = " ".join(keywords + fillers)
        truth_id = f"v{q:03d}"
        decoy_id = f"d{q:03d}"

        if kinds[q] == "clean":
            clean_ids.append(truth_id)
            # Truth leans on the fillers; the decoy shows keywords only.
            truth_frame = " ".join(keywords + fillers * 3)
            truth_frames = [truth_frame] * m
            decoy_frames = [" ".join(keywords)] * m
        else:
            disagreement_ids.append(truth_id)
            # Two keyword-heavy frames, the rest junk; the decoy (a
            # confuser here) shows the fillers only.
            good_frame = " ".join(keywords * 2 + fillers)
            junk = iter(f"q{q}junk{j}" for j in range(4 * m))
            truth_frames = [good_frame, good_frame] + [
                " ".join(next(junk) for _ in range(4)) for _ in range(m - 2)
            ]
            decoy_frames = [" ".join(fillers)] * m

        records.append(ManifestRecord(video_id=truth_id,
                                      frames=tuple(truth_frames),
                                      captions=(caption,), split="test"))
        # Decoys join the gallery only; the train split carries them so
        # they never become caption queries.
        records.append(ManifestRecord(video_id=decoy_id,
                                      frames=tuple(decoy_frames),
                                      captions=(), split="train"))

    manifest = DatasetManifest(records=tuple(records))
    config = EngineConfig(candidates=16, clips=3, me_threshold=0.0,
                          frames_per_video=m, recall_ranks=(1, 5, 10),
                          rng_seed=spec.seed)
    provider = SyntheticProvider(seed=spec.seed, dim=spec.dim)
    return Benchmark(manifest=manifest, provider=provider, config=config,
                     clean_ids=tuple(clean_ids),
                     disagreement_ids=tuple(disagreement_ids))
