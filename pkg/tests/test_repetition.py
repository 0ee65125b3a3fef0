"""Unit tests for clip voting, matching entropy, and the gated pipeline."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from refrain.core import EngineConfig
from refrain.dataset import build_eval_dataset
from refrain.errors import EmptyInputError, ScorerError, ValidationError
from refrain.gar import FrameSet
from refrain.manifest import DatasetManifest, ManifestRecord
from refrain.providers import MatchScorer, SyntheticProvider
from refrain.repetition import (
    ClipSet,
    ScoreMatrix,
    augment_caption,
    build_score_matrix,
    collect_votes,
    matching_entropy,
    repetition_pipeline,
    segment_clips,
    should_repeat,
    uniform_segmenter,
)
from refrain.retrieval import evaluate
from refrain.tagger import Caption

CAT = "A cat is panting like a dog and rolling around in a cat bed."
CARS = "Three cars racing on a track, trying to outpace each other."

vote_lists = st.lists(st.integers(min_value=0, max_value=9), min_size=1,
                      max_size=16)


def frames_of(n, d=4, seed=0):
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((n, d))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return FrameSet("v", rows)


class TestSegmentClips:
    def test_single_frame_video_pads_with_original(self):
        frames = frames_of(1)
        clip_set = segment_clips(frames, clips=3)
        assert len(clip_set.variants) == 4
        for variant in clip_set.variants:
            np.testing.assert_array_equal(variant.frames, frames.frames)

    def test_even_split(self):
        frames = frames_of(12)
        clip_set = segment_clips(frames, clips=3, min_clip_frames=2)
        spans = [v.frames for v in clip_set.variants[1:]]
        np.testing.assert_array_equal(spans[0], frames.frames[0:4])
        np.testing.assert_array_equal(spans[1], frames.frames[4:8])
        np.testing.assert_array_equal(spans[2], frames.frames[8:12])

    def test_merge_then_truncate_hand_trace(self):
        # Hand-traced: proposing [0:2][2:3][3:5][5:7][7:10] with a 1-frame
        # span and min 2 merges the short span left, giving
        # [0:3][3:5][5:7][7:10]; truncating to 3 keeps the first three.
        frames = frames_of(10)

        def segmenter(n, w):
            return [(0, 2), (2, 3), (3, 5), (5, 7), (7, 10)]

        clip_set = segment_clips(frames, clips=3, min_clip_frames=2,
                                 segmenter=segmenter)
        expected = [(0, 3), (3, 5), (5, 7)]
        for variant, (a, b) in zip(clip_set.variants[1:], expected):
            np.testing.assert_array_equal(variant.frames, frames.frames[a:b])

    def test_leading_short_span_merges_right(self):
        frames = frames_of(8)

        def segmenter(n, w):
            return [(0, 1), (1, 4), (4, 8)]

        clip_set = segment_clips(frames, clips=3, min_clip_frames=2,
                                 segmenter=segmenter)
        np.testing.assert_array_equal(clip_set.variants[1].frames,
                                      frames.frames[0:4])
        np.testing.assert_array_equal(clip_set.variants[2].frames,
                                      frames.frames[4:8])
        # only two spans remain, so the original pads the set
        np.testing.assert_array_equal(clip_set.variants[3].frames,
                                      frames.frames)

    def test_variant_zero_is_full_video(self):
        frames = frames_of(9)
        clip_set = segment_clips(frames, clips=2)
        assert clip_set.variants[0] is frames

    def test_uniform_segmenter_covers_everything(self):
        for n in (1, 2, 5, 8, 13):
            spans = uniform_segmenter(n, 3)
            assert spans[0][0] == 0 and spans[-1][1] == n
            for (a, b), (c, d) in zip(spans, spans[1:]):
                assert b == c


class TestScoreMatrix:
    def test_minimal_shape(self):
        clip_sets = [ClipSet("v", (frames_of(2), frames_of(2)))]

        class CountingScorer:
            calls = 0

            def score(self, text, frames):
                CountingScorer.calls += 1
                return float(CountingScorer.calls)

        matrix = build_score_matrix("q", clip_sets, CountingScorer())
        assert matrix.scores.shape == (1, 2)
        assert CountingScorer.calls == 2

    def test_constant_scorer_gives_constant_matrix(self):
        clip_sets = [ClipSet("a", (frames_of(2), frames_of(2))),
                     ClipSet("b", (frames_of(2), frames_of(2)))]

        class Flat:
            def score(self, text, frames):
                return 0.25

        matrix = build_score_matrix("q", clip_sets, Flat())
        np.testing.assert_array_equal(matrix.scores, np.full((2, 2), 0.25))

    def test_table_driven_scorer(self):
        table = np.arange(12.0).reshape(3, 4)
        clip_sets = []
        for row in range(3):
            variants = tuple(frames_of(2, seed=row * 10 + col)
                             for col in range(4))
            clip_sets.append(ClipSet(f"v{row}", variants))
        lookup = {}
        for row, cs in enumerate(clip_sets):
            for col, variant in enumerate(cs.variants):
                lookup[id(variant)] = table[row, col]

        class Table:
            def score(self, text, frames):
                return lookup[id(frames)]

        matrix = build_score_matrix("q", clip_sets, Table())
        np.testing.assert_array_equal(matrix.scores, table)

    def test_scorer_failure_carries_video_id(self):
        clip_sets = [ClipSet("vx", (frames_of(2), frames_of(2)))]

        class Boom:
            def score(self, text, frames):
                raise RuntimeError("nope")

        with pytest.raises(ScorerError) as err:
            build_score_matrix("q", clip_sets, Boom())
        assert err.value.candidate_id == "vx"

    def test_transpose_is_involutive(self):
        matrix = ScoreMatrix(np.arange(8.0).reshape(2, 4), (0, 1))
        np.testing.assert_array_equal(matrix.transposed().T, matrix.scores)
        votes = collect_votes(matrix)
        double = ScoreMatrix(matrix.transposed().T, (0, 1))
        assert collect_votes(double) == votes


class TestCollectVotes:
    def test_single_candidate(self):
        matrix = ScoreMatrix(np.array([[0.3, 0.8, 0.1]]), (0,))
        assert collect_votes(matrix) == [0, 0, 0]

    def test_per_column_argmax(self):
        matrix = ScoreMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]), (0, 1))
        assert collect_votes(matrix) == [0, 1]

    def test_constant_matrix_ties_to_zero(self):
        matrix = ScoreMatrix(np.zeros((3, 4)), (0, 1, 2))
        assert collect_votes(matrix) == [0, 0, 0, 0]

    def test_invariant_under_column_shift(self):
        rng = np.random.default_rng(21)
        scores = rng.standard_normal((5, 4))
        base = collect_votes(ScoreMatrix(scores, tuple(range(5))))
        shifted = scores.copy()
        shifted[:, 2] += 17.5
        assert collect_votes(ScoreMatrix(shifted, tuple(range(5)))) == base


class TestMatchingEntropy:
    def test_unanimous_is_exactly_zero(self):
        assert matching_entropy([2, 2, 2, 2]) == 0.0

    def test_worked_example(self):
        expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        assert matching_entropy([0, 0, 0, 2]) == pytest.approx(expected, abs=1e-12)
        assert matching_entropy([0, 0, 0, 2]) == pytest.approx(0.5623, abs=1e-4)

    def test_all_distinct_reaches_maximum(self):
        assert matching_entropy([3, 1, 4, 2]) == pytest.approx(math.log(4),
                                                               abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            matching_entropy([])

    @given(vote_lists)
    def test_bounds_and_unanimity(self, votes):
        me = matching_entropy(votes)
        assert 0.0 <= me <= math.log(len(votes)) + 1e-12
        if len(set(votes)) == 1:
            assert me == 0.0
        else:
            assert me > 0.0

    @given(vote_lists, st.randoms())
    def test_permutation_invariance(self, votes, rnd):
        shuffled = list(votes)
        rnd.shuffle(shuffled)
        assert matching_entropy(shuffled) == pytest.approx(
            matching_entropy(votes), abs=1e-12)

    @given(vote_lists)
    def test_relabeling_invariance(self, votes):
        relabeled = [v + 100 for v in votes]
        assert matching_entropy(relabeled) == pytest.approx(
            matching_entropy(votes), abs=1e-12)


class TestShouldRepeat:
    def test_unanimous_never_triggers_at_default(self):
        assert should_repeat(0.0, 0.0) is False

    def test_disagreement_triggers(self):
        assert should_repeat(0.5623, 0.0) is True

    def test_strict_inequality(self):
        assert should_repeat(0.5623, 0.5623) is False

    def test_negative_entropy_rejected(self):
        with pytest.raises(ValidationError):
            should_repeat(-0.1, 0.0)


class TestAugmentCaption:
    def test_cat_caption_suffix(self, lexicon):
        caption = Caption.from_text("q", CAT, lexicon)
        out = augment_caption(caption, lexicon)
        assert out.augmented_text == CAT + " cat, panting, dog, rolling, bed"

    def test_cars_caption_suffix(self, lexicon):
        caption = Caption.from_text("q", CARS, lexicon)
        out = augment_caption(caption, lexicon)
        assert out.augmented_text == CARS + " cars, racing, track, outpace"

    def test_keyword_free_caption_unchanged(self, lexicon):
        caption = Caption.from_text("q", "zorp glipped the fnord", lexicon)
        out = augment_caption(caption, lexicon)
        assert out.augmented_text == caption.text
        assert out.keywords == ()


def disagreement_manifest():
    """Two queries: one clean, one with planted voter disagreement."""
    records = []
    kw_a = ["cat", "jumping", "sofa", "sleeping"]
    fill_a = [f"a{j}" for j in range(6)]
    records.append(ManifestRecord(
        "va", tuple([" ".join(kw_a + fill_a * 3)] * 8),
        (" ".join(kw_a + fill_a),), "test"))
    records.append(ManifestRecord(
        "da", tuple([" ".join(kw_a)] * 8), (), "train"))

    kw_b = ["dog", "barking", "garden", "digging"]
    fill_b = [f"b{j}" for j in range(6)]
    good = " ".join(kw_b * 2 + fill_b)
    junk = [" ".join(f"jb{j}x{i}" for i in range(4)) for j in range(6)]
    records.append(ManifestRecord(
        "vb", tuple([good, good] + junk), (" ".join(kw_b + fill_b),), "test"))
    records.append(ManifestRecord(
        "db", tuple([" ".join(fill_b)] * 8), (), "train"))
    return DatasetManifest(records=tuple(records))


class TestRepetitionPipeline:
    @pytest.fixture
    def setup(self):
        provider = SyntheticProvider(seed=9, dim=256)
        config = EngineConfig(candidates=4, recall_ranks=(1, 2, 4),
                              clips=3, frames_per_video=8, me_threshold=0.0)
        dataset = build_eval_dataset(disagreement_manifest(), provider, config,
                                     include_train_gallery=True)
        return dataset, config, MatchScorer(provider)

    def test_untriggered_queries_keep_baseline_ranking(self, setup):
        dataset, config, scorer = setup
        baseline = evaluate(dataset, config, scorer)
        run, diags = repetition_pipeline(dataset, config, scorer)
        for i, diag in enumerate(diags):
            if not diag.report.triggered:
                assert run.ranked[i] == baseline.ranked[i]

    def test_infinite_threshold_matches_baseline_exactly(self, setup):
        dataset, config, scorer = setup
        baseline = evaluate(dataset, config, scorer)
        config_inf = config.with_overrides(me_threshold=float("inf"))
        run, diags = repetition_pipeline(dataset, config_inf, scorer)
        assert run.ranked == baseline.ranked
        assert run.recall == baseline.recall
        assert not any(d.report.triggered for d in diags)

    def test_disagreement_query_is_repaired(self, setup):
        dataset, config, scorer = setup
        baseline = evaluate(dataset, config, scorer)
        run, diags = repetition_pipeline(dataset, config, scorer)
        clean, hard = diags[0], diags[1]
        assert not clean.report.triggered
        assert clean.report.me_value == 0.0
        assert hard.report.triggered
        assert hard.report.me_value > 0.0
        assert baseline.recall[1] == 0.5
        assert run.recall[1] == 1.0
        assert hard.pre_rank == 2 and hard.post_rank == 1

    def test_histogram_counts_sum_to_voters(self, setup):
        dataset, config, scorer = setup
        _, diags = repetition_pipeline(dataset, config, scorer)
        for diag in diags:
            assert sum(diag.report.histogram.values()) == config.clips + 1

    def test_mode_all_augments_everything(self, setup):
        dataset, config, scorer = setup
        _, diags = repetition_pipeline(dataset, config, scorer, mode="all")
        assert all(d.report.triggered for d in diags)

    def test_v2t_direction_runs(self, setup):
        dataset, config, scorer = setup
        # v2t needs captions on every gallery video: restrict to queries.
        from refrain.dataset import EvalDataset

        test_only = EvalDataset(videos=dataset.videos[:2],
                                captions=dataset.captions)
        config_small = config.with_overrides(candidates=2,
                                             recall_ranks=(1, 2))
        run, diags = repetition_pipeline(test_only, config_small, scorer,
                                         direction="v2t")
        assert len(run.ranked) == 2
        assert len(diags) == 2

    def test_unanimous_planted_set_identical_to_baseline(self, identity_setup):
        dataset, config, scorer = identity_setup
        baseline = evaluate(dataset, config, scorer)
        run, diags = repetition_pipeline(dataset, config, scorer)
        assert run.ranked == baseline.ranked
        assert all(d.report.me_value == 0.0 for d in diags)
        assert not any(d.report.triggered for d in diags)
