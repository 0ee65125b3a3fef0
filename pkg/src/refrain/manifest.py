"""Dataset manifests: line-delimited JSON, one video record per line.

Record schema::

    {"video_id": str,            # unique across the manifest
     "frames": [str, ...],       # frame sources: descriptor text,
                                 # file path, or precomputed-store key
     "captions": [str, ...],     # >= 1 for test records
     "split": "train" | "test"}

The format is streamable and diff-friendly; parse errors carry the
offending line number.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateIdError, ManifestError, ValidationError

_SPLITS = ("train", "test")


@dataclass(frozen=True)
class ManifestRecord:
    video_id: str
    frames: tuple[str, ...]
    captions: tuple[str, ...]
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]

    def split_records(self, split: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == split]

    @property
    def test_records(self) -> list[ManifestRecord]:
        return self.split_records("test")

    @property
    def train_records(self) -> list[ManifestRecord]:
        return self.split_records("train")

    def __len__(self) -> int:
        return len(self.records)

    def save(self, path) -> None:
        lines = []
        for r in self.records:
            lines.append(json.dumps({
                "video_id": r.video_id,
                "frames": list(r.frames),
                "captions": list(r.captions),
                "split": r.split,
            }))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_record(obj, line: int) -> ManifestRecord:
    if not isinstance(obj, dict):
        raise ValidationError("record must be a JSON object", line=line)
    video_id = obj.get("video_id")
    if not isinstance(video_id, str) or not video_id:
        raise ValidationError("missing or empty 'video_id'", line=line)
    split = obj.get("split", "test")
    if split not in _SPLITS:
        raise ValidationError(f"split must be one of {_SPLITS}, got {split!r}",
                              line=line)
    frames = obj.get("frames")
    if (not isinstance(frames, list) or not frames
            or not all(isinstance(f, str) and f for f in frames)):
        raise ValidationError("'frames' must be a non-empty list of strings",
                              line=line)
    captions = obj.get("captions", [])
    if not isinstance(captions, list) or not all(
            isinstance(c, str) for c in captions):
        raise ValidationError("'captions' must be a list of strings", line=line)
    if split == "test" and not any(c.strip() for c in captions):
        raise ValidationError(
            f"test record {video_id!r} needs at least one caption", line=line)
    return ManifestRecord(video_id=video_id, frames=tuple(frames),
                          captions=tuple(captions), split=split)


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a manifest file."""
    path = Path(path)
    records = []
    seen: set[str] = set()
    text = path.read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON: {exc.msg}", line=lineno)
        record = _parse_record(obj, lineno)
        if record.video_id in seen:
            raise DuplicateIdError(
                f"duplicate video_id {record.video_id!r}", line=lineno)
        seen.add(record.video_id)
        records.append(record)
    if not records:
        raise ManifestError(f"{path}: manifest holds no records")
    return DatasetManifest(records=tuple(records))
