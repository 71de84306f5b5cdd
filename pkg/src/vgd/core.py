"""Domain types and the combined decoding objective.

All scores are carried in natural-log space. The combined objective of a
partial prompt is::

    combined = align_score + alpha * lm_logprob_sum

where ``align_score`` is the scaled cosine similarity between the prompt's
text embedding and the target, and ``lm_logprob_sum`` is the sum of LM
next-token log-probabilities of the generated tokens. The two ablation modes
keep exactly one of the terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateEmbeddingError,
    DimensionError,
    InvalidScoreError,
    InvalidTargetError,
)

MODES = ("full", "llm_only", "clip_only")
TARGET_KINDS = ("image", "image_set", "text")

#: L2 tolerance under which a vector counts as unit-normalized.
NORM_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingVector:
    """A real-valued embedding vector.

    The wrapped array is copied to float64 and frozen; instances are safe to
    share across threads.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 1 or v.size == 0:
            raise DimensionError(f"embedding must be a non-empty 1-D vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidScoreError("embedding contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def norm(self) -> float:
        return float(np.sqrt((self.values * self.values).sum()))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "EmbeddingVector":
        n = self.norm()
        if n == 0.0:
            raise DegenerateEmbeddingError("cannot normalize a zero vector")
        return EmbeddingVector(self.values / n)

    def __eq__(self, other) -> bool:
        return isinstance(other, EmbeddingVector) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True)
class Hypothesis:
    """A partial prompt under construction.

    ``lm_token_ids`` are the generated LM token ids only; the fixed chat
    template context is not part of the hypothesis. ``text`` is the
    detokenization of those ids, i.e. the prompt as the alignment encoder
    sees it. ``align_score`` and ``combined_score`` are NaN on freshly
    expanded candidates until pruning scores them.
    """

    lm_token_ids: tuple[int, ...]
    text: str
    lm_logprob_sum: float
    align_score: float
    combined_score: float
    terminated: bool = False
    clip_token_count: int = 0

    @property
    def last_token_id(self) -> int:
        """Id of the newest token; -1 for the empty hypothesis."""
        return self.lm_token_ids[-1] if self.lm_token_ids else -1

    def sort_key(self):
        """Descending-score ordering with the lowest-token-id tie break.

        Equal combined scores are broken by the lowest id of the last token,
        then by the full id sequence, so sorts are fully deterministic.
        """
        return (-self.combined_score, self.last_token_id, self.lm_token_ids)


@dataclass(frozen=True)
class TargetSpec:
    """What the decoded prompt must align to.

    ``image`` and ``text`` carry exactly one normalized embedding;
    ``image_set`` carries two or more (a style described by several images).
    """

    kind: str
    embeddings: tuple[EmbeddingVector, ...]

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise InvalidTargetError(f"unknown target kind {self.kind!r}")
        embs = tuple(self.embeddings)
        if not embs:
            raise InvalidTargetError("target has no embeddings")
        if self.kind == "image_set":
            if len(embs) < 2:
                raise InvalidTargetError("image_set targets need at least 2 embeddings")
        elif len(embs) != 1:
            raise InvalidTargetError(f"{self.kind} targets carry exactly 1 embedding")
        dims = {e.dim for e in embs}
        if len(dims) != 1:
            raise DimensionError(f"target embeddings disagree on dimension: {sorted(dims)}")
        for e in embs:
            if not e.is_normalized():
                raise InvalidTargetError("target embeddings must be unit-normalized")
        object.__setattr__(self, "embeddings", embs)

    @property
    def dim(self) -> int:
        return self.embeddings[0].dim

    @classmethod
    def image(cls, emb: EmbeddingVector) -> "TargetSpec":
        return cls("image", (emb.normalized(),))

    @classmethod
    def image_set(cls, embs) -> "TargetSpec":
        return cls("image_set", tuple(e.normalized() for e in embs))

    @classmethod
    def text(cls, emb: EmbeddingVector) -> "TargetSpec":
        return cls("text", (emb.normalized(),))


@dataclass(frozen=True)
class DecodeConfig:
    """Knobs of one decode run.

    ``logit_scale`` of None means "use the scale advertised by the alignment
    scorer" (the learned contrastive scale, 100.0 for the toy backend).
    """

    beam_width: int = 10
    init_tokens: int = 1
    alpha: float = 0.67
    max_clip_tokens: int = 32
    logit_scale: float | None = None
    mode: str = "full"
    template_id: str = "inversion"
    banned_token_ids: frozenset = frozenset()
    tie_break: str = "lowest_token_id"
    seed: int = 0

    def validate(self) -> None:
        if self.beam_width < 1:
            raise ConfigError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.init_tokens < 0:
            raise ConfigError(f"init_tokens must be >= 0, got {self.init_tokens}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ConfigError(f"alpha must be a finite non-negative real, got {self.alpha}")
        # 75 = the alignment encoder's 77-token hard cap minus two specials.
        if not (1 <= self.max_clip_tokens <= 75):
            raise ConfigError(f"max_clip_tokens must be in [1, 75], got {self.max_clip_tokens}")
        if self.logit_scale is not None and not (
            math.isfinite(self.logit_scale) and self.logit_scale > 0.0
        ):
            raise ConfigError(f"logit_scale must be positive, got {self.logit_scale}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tie_break != "lowest_token_id":
            raise ConfigError(f"unknown tie_break policy {self.tie_break!r}")


def combined_score(
    align_score: float, lm_logprob_sum: float, alpha: float, mode: str = "full"
) -> float:
    """Combined objective of a hypothesis, in nats.

    ``llm_only`` keeps only the alpha-weighted LM term, ``clip_only`` keeps
    only the alignment term.
    """
    if not (
        math.isfinite(align_score) and math.isfinite(lm_logprob_sum) and math.isfinite(alpha)
    ):
        raise InvalidScoreError(
            f"non-finite score inputs: align={align_score}, lm={lm_logprob_sum}, alpha={alpha}"
        )
    if mode == "llm_only":
        return alpha * lm_logprob_sum
    if mode == "clip_only":
        return align_score
    if mode != "full":
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    return align_score + alpha * lm_logprob_sum


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    # multiply-then-reduce keeps the summation order identical to the batched
    # scoring path in the engine (same pairwise reduction over the same axis)
    return float((a * b).sum())


def cosine_alignment(
    text_emb: EmbeddingVector, image_emb: EmbeddingVector, scale: float
) -> float:
    """Scaled cosine similarity between a text and an image embedding.

    Result lies in [-scale, +scale]; the cosine is clamped so rounding can
    never push it past the bound.
    """
    if text_emb.dim != image_emb.dim:
        raise DimensionError(f"dimension mismatch: {text_emb.dim} vs {image_emb.dim}")
    t, i = text_emb.values, image_emb.values
    nt = math.sqrt(_dot(t, t))
    ni = math.sqrt(_dot(i, i))
    if nt == 0.0 or ni == 0.0:
        raise DegenerateEmbeddingError("zero-norm embedding in cosine similarity")
    cos = _dot(t, i) / (nt * ni)
    if cos > 1.0:
        cos = 1.0
    elif cos < -1.0:
        cos = -1.0
    return scale * cos


def target_alignment(text_emb: EmbeddingVector, target: TargetSpec, scale: float) -> float:
    """Alignment of a text embedding against a target.

    Single-embedding targets score by cosine; image sets score by the
    arithmetic mean of the per-image cosines.
    """
    if not target.embeddings:
        raise InvalidTargetError("target has no embeddings")
    if target.kind == "image_set":
        return float(np.mean([cosine_alignment(text_emb, e, scale) for e in target.embeddings]))
    return cosine_alignment(text_emb, target.embeddings[0], scale)


def batch_target_alignment(matrix: np.ndarray, target: TargetSpec, scale: float) -> np.ndarray:
    """Row-wise :func:`target_alignment` over a (n, dim) embedding matrix.

    Bitwise-equal to calling :func:`target_alignment` on each row: both paths
    reduce dot products with the same multiply-then-sum order, clamp the
    cosine, scale, and (for image sets) average per-member scores the same
    way. Pruning and cache scoring rely on that equality.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise DimensionError(f"expected a non-empty (n, dim) matrix, got shape {m.shape}")
    if m.shape[1] != target.dim:
        raise DimensionError(f"dimension mismatch: rows are {m.shape[1]}-d, target is {target.dim}-d")
    if not np.all(np.isfinite(m)):
        raise InvalidScoreError("embedding matrix contains non-finite values")
    row_norms = np.sqrt((m * m).sum(axis=1))
    zero_rows = np.nonzero(row_norms == 0.0)[0]
    if zero_rows.size:
        raise DegenerateEmbeddingError(f"zero-norm embedding at row {int(zero_rows[0])}")
    per_member = []
    for emb in target.embeddings:
        v = emb.values
        ni = math.sqrt(_dot(v, v))
        if ni == 0.0:
            raise DegenerateEmbeddingError("zero-norm embedding in cosine similarity")
        cos = (m * v).sum(axis=1) / (row_norms * ni)
        np.clip(cos, -1.0, 1.0, out=cos)
        per_member.append(scale * cos)
    if target.kind == "image_set":
        return np.mean(np.stack(per_member), axis=0)
    return per_member[0]
