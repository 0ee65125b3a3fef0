"""Unit tests for the embedding store and the manifest loader."""
import numpy as np
import pytest

from refrain.errors import (
    DimensionMismatchError,
    DuplicateIdError,
    ManifestError,
    StoreError,
    ValidationError,
)
from refrain.manifest import load_manifest
from refrain.store import EmbeddingStore


def unit(vec):
    arr = np.asarray(vec, dtype=np.float64)
    return arr / np.linalg.norm(arr)


class TestEmbeddingStore:
    def _sample(self, n=5, d=16, seed=0):
        rng = np.random.default_rng(seed)
        store = EmbeddingStore("text", d)
        for i in range(n):
            store.add(f"id{i}", unit(rng.standard_normal(d)))
        return store

    def test_round_trip_is_bit_exact(self, tmp_path):
        store = self._sample()
        path = tmp_path / "vectors.emb"
        store.save(path)
        loaded = EmbeddingStore.load(path)
        assert loaded.kind == store.kind
        assert loaded.dim == store.dim
        assert loaded.ids() == store.ids()

        second = tmp_path / "again.emb"
        loaded.save(second)
        assert path.read_bytes() == second.read_bytes()

    def test_loaded_values_match_float32_cast(self, tmp_path):
        store = self._sample(n=2)
        path = tmp_path / "vectors.emb"
        store.save(path)
        loaded = EmbeddingStore.load(path)
        for vid in store.ids():
            np.testing.assert_array_equal(
                loaded.get(vid), store.get(vid).astype(np.float32).astype(np.float64))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "vectors.emb"
        self._sample().save(path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(StoreError):
            EmbeddingStore.load(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "vectors.emb"
        self._sample().save(path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(StoreError):
            EmbeddingStore.load(path)

    def test_duplicate_id_rejected(self):
        store = EmbeddingStore("text", 2)
        store.add("a", [1.0, 0.0])
        with pytest.raises(ValidationError):
            store.add("a", [0.0, 1.0])

    def test_non_unit_vector_rejected(self):
        store = EmbeddingStore("frame", 2)
        with pytest.raises(ValidationError):
            store.add("a", [3.0, 4.0])

    def test_wrong_dimension_rejected(self):
        store = EmbeddingStore("frame", 3)
        with pytest.raises(DimensionMismatchError):
            store.add("a", [1.0, 0.0])


class TestLoadManifest:
    def test_minimal_record(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"video_id": "v1", "frames": ["f"], '
                        '"captions": ["hello"], "split": "test"}\n')
        manifest = load_manifest(path)
        assert len(manifest) == 1
        assert manifest.records[0].video_id == "v1"

    def test_duplicate_video_id(self, tmp_path):
        path = tmp_path / "m.jsonl"
        line = '{"video_id": "v1", "frames": ["f"], "captions": ["c"], "split": "test"}'
        path.write_text(line + "\n" + line + "\n")
        with pytest.raises(DuplicateIdError) as err:
            load_manifest(path)
        assert err.value.line == 2

    def test_test_record_requires_caption(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"video_id": "v1", "frames": ["f"], '
                        '"captions": [], "split": "test"}\n')
        with pytest.raises(ValidationError):
            load_manifest(path)

    def test_train_record_may_omit_captions(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"video_id": "v1", "frames": ["f"], "split": "train"}\n')
        manifest = load_manifest(path)
        assert manifest.records[0].captions == ()

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"video_id": "v1", "frames": ["f"], '
                        '"captions": ["c"], "split": "test"}\n{bad json\n')
        with pytest.raises(ManifestError) as err:
            load_manifest(path)
        assert err.value.line == 2

    def test_missing_frames_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"video_id": "v1", "captions": ["c"], "split": "test"}\n')
        with pytest.raises(ValidationError):
            load_manifest(path)

    def test_save_load_round_trip(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"video_id": "v1", "frames": ["f1", "f2"], '
                        '"captions": ["c"], "split": "test"}\n')
        manifest = load_manifest(path)
        other = tmp_path / "copy.jsonl"
        manifest.save(other)
        assert load_manifest(other) == manifest
