"""Precomputed vocabulary embeddings for beam initialization.

Scanning the whole vocabulary against a target happens once per decode, so
the per-token embeddings are computed once and stored. The on-disk format is
a small little-endian binary file::

    magic   b"VGDC"
    u32     format version (1)
    u32     vocab_size
    u32     dim
    u32     byte length of backend id, then that many UTF-8 bytes
    records vocab_size x (u32 token id, dim x f32 embedding)

Token strings are not stored — a cache is only meaningful next to the
vocabulary it was built from, so loading takes the vocabulary and checks the
sizes agree. Rebuilding from the same backend yields byte-identical files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import TargetSpec, batch_target_alignment
from ..errors import CacheFormatError, DimensionError
from .base import AlignScorer

MAGIC = b"VGDC"
FORMAT_VERSION = 1

#: embed_text batch size while building; keeps single requests bounded when
#: the alignment scorer is remote.
_BUILD_BATCH = 512


@dataclass(frozen=True)
class CacheHit:
    """One vocabulary entry scored against a target."""

    token_id: int
    token: str
    score: float


@dataclass(frozen=True)
class VocabCache:
    """float32 embedding rows for every vocabulary token.

    Row order follows ``vocab``; ``token_ids[i]`` is the LM token id of
    ``vocab[i]``. Scoring casts rows to float64 so ranking matches what a
    fresh embed of the same tokens would produce to float32 precision.
    """

    backend_id: str
    vocab: tuple[str, ...]
    token_ids: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        ids = np.ascontiguousarray(self.token_ids, dtype=np.uint32)
        mat = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if mat.ndim != 2 or mat.shape[0] != len(self.vocab) or ids.shape != (len(self.vocab),):
            raise CacheFormatError(
                f"inconsistent cache shapes: {len(self.vocab)} tokens, "
                f"ids {ids.shape}, matrix {mat.shape}"
            )
        if len(self.vocab) == 0:
            raise CacheFormatError("vocabulary cache must cover at least one token")
        ids.setflags(write=False)
        mat.setflags(write=False)
        object.__setattr__(self, "token_ids", ids)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "vocab", tuple(self.vocab))

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    @cached_property
    def _matrix64(self) -> np.ndarray:
        m = self.matrix.astype(np.float64)
        m.setflags(write=False)
        return m

    def top_m(self, target: TargetSpec, m: int, scale: float = 1.0) -> list[CacheHit]:
        """The ``m`` vocabulary tokens best aligned with the target.

        Ordering is by descending alignment with ties broken by lower token
        id. Asking for more tokens than the vocabulary holds returns them
        all.
        """
        if m < 0:
            raise ValueError(f"m must be >= 0, got {m}")
        if target.dim != self.dim:
            raise DimensionError(f"target is {target.dim}-d but cache rows are {self.dim}-d")
        if m == 0:
            return []
        scores = batch_target_alignment(self._matrix64, target, scale)
        order = np.lexsort((self.token_ids, -scores))[: min(m, self.vocab_size)]
        return [
            CacheHit(token_id=int(self.token_ids[i]), token=self.vocab[i], score=float(scores[i]))
            for i in order
        ]

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        buf = bytearray()
        buf += MAGIC
        buf += struct.pack("<III", FORMAT_VERSION, self.vocab_size, self.dim)
        bid = self.backend_id.encode("utf-8")
        buf += struct.pack("<I", len(bid))
        buf += bid
        mat = np.ascontiguousarray(self.matrix, dtype="<f4")
        for i in range(self.vocab_size):
            buf += struct.pack("<I", int(self.token_ids[i]))
            buf += mat[i].tobytes()
        Path(path).write_bytes(bytes(buf))

    @classmethod
    def load(cls, path, vocab: Sequence[str]) -> "VocabCache":
        data = Path(path).read_bytes()
        view = memoryview(data)
        if len(view) < 4 or bytes(view[:4]) != MAGIC:
            raise CacheFormatError(f"{path}: not a vocabulary cache (bad magic)")
        try:
            version, vocab_size, dim = struct.unpack_from("<III", view, 4)
            (bid_len,) = struct.unpack_from("<I", view, 16)
            backend_id = bytes(view[20 : 20 + bid_len]).decode("utf-8")
        except (struct.error, UnicodeDecodeError) as exc:
            raise CacheFormatError(f"{path}: truncated or corrupt header: {exc}") from exc
        if version != FORMAT_VERSION:
            raise CacheFormatError(f"{path}: unsupported cache version {version}")
        if vocab_size != len(vocab):
            raise CacheFormatError(
                f"{path}: cache covers {vocab_size} tokens but vocabulary has {len(vocab)}"
            )
        record = 4 + 4 * dim
        offset = 20 + bid_len
        if len(view) != offset + vocab_size * record:
            raise CacheFormatError(
                f"{path}: expected {offset + vocab_size * record} bytes, found {len(view)}"
            )
        token_ids = np.empty(vocab_size, dtype=np.uint32)
        matrix = np.empty((vocab_size, dim), dtype=np.float32)
        for i in range(vocab_size):
            (token_ids[i],) = struct.unpack_from("<I", view, offset)
            matrix[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset + 4)
            offset += record
        return cls(backend_id=backend_id, vocab=tuple(vocab), token_ids=token_ids, matrix=matrix)

    @staticmethod
    def read_header(path) -> dict:
        """Header fields only, without materializing the matrix."""
        data = Path(path).read_bytes()
        if len(data) < 20 or data[:4] != MAGIC:
            raise CacheFormatError(f"{path}: not a vocabulary cache (bad magic)")
        version, vocab_size, dim = struct.unpack_from("<III", data, 4)
        (bid_len,) = struct.unpack_from("<I", data, 16)
        backend_id = data[20 : 20 + bid_len].decode("utf-8")
        return {
            "version": version,
            "vocab_size": vocab_size,
            "dim": dim,
            "backend_id": backend_id,
            "bytes": len(data),
        }


def build_vocab_cache(
    align: AlignScorer, vocab: Sequence[str], token_ids: Sequence[int] | None = None, path=None
) -> VocabCache:
    """Embed every vocabulary token and assemble (optionally save) a cache.

    ``token_ids`` defaults to positional ids 0..n-1, which is what the toy
    backend's content words use.
    """
    words = list(vocab)
    if not words:
        raise ValueError("cannot build a cache over an empty vocabulary")
    if token_ids is None:
        ids = np.arange(len(words), dtype=np.uint32)
    else:
        ids = np.asarray(list(token_ids), dtype=np.uint32)
        if ids.shape != (len(words),):
            raise ValueError("token_ids must match the vocabulary length")
    rows = []
    for start in range(0, len(words), _BUILD_BATCH):
        for emb in align.embed_text(words[start : start + _BUILD_BATCH]):
            rows.append(emb.values)
    matrix = np.stack(rows).astype("<f4")
    cache = VocabCache(
        backend_id=align.backend_id, vocab=tuple(words), token_ids=ids, matrix=matrix
    )
    if path is not None:
        cache.save(path)
    return cache
