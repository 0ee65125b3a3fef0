"""Binary embedding store: fixed-width header + float32 payload.

Layout (all integers little-endian):

    magic   8 bytes  b"REFRSTOR"
    version u32      1
    kind    u8       0 = text, 1 = frame
    dim     u32
    count   u64
    then per record: u16 id byte length, id (UTF-8), dim * f32

Vectors are stored float32 and returned as float64 (an exact widening),
so a load/save round trip is bit-exact.  Load verifies unit norms and
id uniqueness.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, StoreError, ValidationError

MAGIC = b"REFRSTOR"
VERSION = 1
_KIND_CODES = {"text": 0, "frame": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_HEADER = struct.Struct("<8sIBIQ")
_LOAD_NORM_TOL = 1e-4


class EmbeddingStore:
    """Id-keyed collection of unit-norm vectors of one dimension."""

    def __init__(self, kind: str, dim: int):
        if kind not in _KIND_CODES:
            raise ValidationError(f"kind must be 'text' or 'frame', got {kind!r}")
        if dim < 1:
            raise ValidationError("dimension must be >= 1")
        self.kind = kind
        self.dim = int(dim)
        self._vectors: dict[str, np.ndarray] = {}

    def add(self, vid: str, vector) -> None:
        arr = np.asarray(vector, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise DimensionMismatchError(
                f"vector for {vid!r} has shape {arr.shape}, expected ({self.dim},)"
            )
        if vid in self._vectors:
            raise ValidationError(f"duplicate store id {vid!r}")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > _LOAD_NORM_TOL:
            raise ValidationError(f"vector for {vid!r} has norm {norm:.6f}")
        self._vectors[vid] = arr

    def get(self, vid: str) -> np.ndarray:
        return self._vectors[vid]

    def __contains__(self, vid: str) -> bool:
        return vid in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def ids(self) -> list[str]:
        return list(self._vectors.keys())

    def save(self, path) -> None:
        path = Path(path)
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, _KIND_CODES[self.kind],
                                  self.dim, len(self._vectors)))
            for vid, vec in self._vectors.items():
                raw = vid.encode("utf-8")
                if len(raw) > 0xFFFF:
                    raise ValidationError(f"id too long: {vid[:32]!r}...")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
                fh.write(vec.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        path = Path(path)
        data = path.read_bytes()
        if len(data) < _HEADER.size:
            raise StoreError(f"{path}: truncated header")
        magic, version, kind_code, dim, count = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise StoreError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise StoreError(f"{path}: unsupported version {version}")
        if kind_code not in _KIND_NAMES:
            raise StoreError(f"{path}: unknown kind code {kind_code}")
        store = cls(_KIND_NAMES[kind_code], dim)
        offset = _HEADER.size
        vec_bytes = 4 * dim
        for i in range(count):
            if offset + 2 > len(data):
                raise StoreError(f"{path}: truncated at record {i}")
            (id_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            if offset + id_len + vec_bytes > len(data):
                raise StoreError(f"{path}: truncated at record {i}")
            vid = data[offset:offset + id_len].decode("utf-8")
            offset += id_len
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
            offset += vec_bytes
            if vid in store:
                raise StoreError(f"{path}: duplicate id {vid!r}")
            arr = vec.astype(np.float64)
            norm = float(np.linalg.norm(arr))
            if abs(norm - 1.0) > _LOAD_NORM_TOL:
                raise StoreError(f"{path}: {vid!r} has norm {norm:.6f}")
            store._vectors[vid] = arr
        if offset != len(data):
            raise StoreError(f"{path}: {len(data) - offset} trailing bytes")
        return store
