"""Deterministic in-process backend for tests, demos and oracles.

The whole model lives in one JSON config:

.. code-block:: json

    {
      "dim": 4,
      "vocab": ["a", "b", "c"],
      "embed": [[...], [...], [...]],
      "bigram": {"<bos>": {"a": 1.0}, "a": {"b": 0.9, "c": 0.1}},
      "fixtures": {"sunset": [0.1, 0.2, 0.3, 0.4]},
      "logit_scale": 100.0
    }

Language model: a word-level bigram table. Content words take ids
``0..n-1`` in vocab order, followed by bos, eos and unk. ``bigram`` maps a
context word (or ``"<bos>"``) to next-word weights; weights are normalized
to probabilities, and ``"<eos>"`` is a valid next-word key. Contexts with
no row (and the unk/eos ids) fall back to a uniform distribution over
content words plus eos, so every context has a proper distribution.

Alignment model: a text embeds as the normalized sum of its words' rows in
``embed``; words outside the vocabulary contribute nothing (but still count
toward the token budget), and the empty text embeds as the normalized mean
of all rows. Images are fixture references — the bytes ``b"fixture:NAME"``
look up a unit-normalized vector in ``fixtures``.

Everything is derived from the config at load time, so two loads of the
same config agree bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import EmbeddingVector
from ..errors import DegenerateEmbeddingError, MediaError, TokenBudgetError
from .base import AlignScorer, LmScorer

BOS_WORD = "<bos>"
EOS_WORD = "<eos>"

#: Hard per-text limit of the alignment tokenizer.
MAX_TEXT_TOKENS = 77


def _canonical_id(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return "toy-" + hashlib.sha256(blob).hexdigest()[:16]


class ToyBackend(LmScorer, AlignScorer):
    """Word-level bigram LM and bag-of-rows alignment scorer in one object."""

    def __init__(self, config: dict):
        vocab = list(config["vocab"])
        if not vocab:
            raise ValueError("toy config needs a non-empty vocab")
        if len(set(vocab)) != len(vocab):
            raise ValueError("toy vocab has duplicate words")
        for word in vocab:
            if not word or " " in word:
                raise ValueError(f"toy vocab word {word!r} must be non-empty and space-free")

        self._vocab = tuple(vocab)
        self._word_to_id = {w: i for i, w in enumerate(self._vocab)}
        n = len(self._vocab)
        self._bos_id = n
        self._eos_id = n + 1
        self._unk_id = n + 2

        dim = int(config["dim"])
        embed = np.asarray(config["embed"], dtype=np.float64)
        if embed.shape != (n, dim):
            raise ValueError(f"embed matrix must be ({n}, {dim}), got {embed.shape}")
        if not np.all(np.isfinite(embed)):
            raise ValueError("embed matrix has non-finite entries")
        embed.setflags(write=False)
        self._embed = embed
        self._dim = dim

        mean = embed.sum(axis=0) / float(n)
        mean_norm = math.sqrt(float((mean * mean).sum()))
        self._empty_embedding = None if mean_norm == 0.0 else mean / mean_norm

        self._rows = self._build_rows(config.get("bigram", {}))

        self._fixtures: dict[str, EmbeddingVector] = {}
        for name, vec in config.get("fixtures", {}).items():
            self._fixtures[name] = EmbeddingVector(vec).normalized()
            if self._fixtures[name].dim != dim:
                raise ValueError(f"fixture {name!r} has dim {self._fixtures[name].dim}, want {dim}")

        self._logit_scale = float(config.get("logit_scale", 100.0))
        self._backend_id = str(config.get("backend_id") or _canonical_id(config))

    # -- construction --------------------------------------------------

    @classmethod
    def from_file(cls, path) -> "ToyBackend":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def _build_rows(self, bigram: dict) -> dict[int, list[tuple[int, float]]]:
        """Normalize the bigram table into per-context sorted logprob rows."""
        content_and_eos = list(range(len(self._vocab))) + [self._eos_id]
        uniform = math.log(1.0 / len(content_and_eos))
        fallback = self._sorted_row([(tid, uniform) for tid in content_and_eos])

        rows: dict[int, list[tuple[int, float]]] = {self._unk_id: fallback, self._eos_id: fallback}
        # The fallback also serves any context id with no explicit row.
        self._fallback_row = fallback

        for ctx_word, weights in bigram.items():
            if ctx_word == BOS_WORD:
                ctx_id = self._bos_id
            elif ctx_word in self._word_to_id:
                ctx_id = self._word_to_id[ctx_word]
            else:
                raise ValueError(f"bigram row for unknown context word {ctx_word!r}")
            pairs = []
            for word, weight in weights.items():
                weight = float(weight)
                if weight < 0:
                    raise ValueError(f"negative bigram weight for {ctx_word!r} -> {word!r}")
                if weight == 0.0:
                    continue
                if word == EOS_WORD:
                    pairs.append((self._eos_id, weight))
                elif word in self._word_to_id:
                    pairs.append((self._word_to_id[word], weight))
                else:
                    raise ValueError(f"bigram target {word!r} not in vocab")
            if not pairs:
                raise ValueError(f"bigram row for {ctx_word!r} has no positive weight")
            total = sum(w for _, w in pairs)
            rows[ctx_id] = self._sorted_row(
                [(tid, math.log(w / total)) for tid, w in pairs]
            )
        return rows

    @staticmethod
    def _sorted_row(pairs: list[tuple[int, float]]) -> list[tuple[int, float]]:
        return sorted(pairs, key=lambda p: (-p[1], p[0]))

    # -- LM side ---------------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return len(self._vocab) + 3

    @property
    def bos_token_id(self) -> int:
        return self._bos_id

    @property
    def eos_token_id(self) -> int:
        return self._eos_id

    @property
    def unk_token_id(self) -> int:
        return self._unk_id

    @property
    def banned_token_ids(self) -> frozenset[int]:
        return frozenset({self._bos_id, self._eos_id, self._unk_id})

    def next_logprobs(
        self,
        context_ids: Sequence[int],
        top_k: int,
        banned_token_ids: frozenset[int] = frozenset(),
    ) -> list[tuple[int, float]]:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        if not context_ids:
            raise ValueError("context_ids must be non-empty")
        last = int(context_ids[-1])
        if not 0 <= last < self.vocab_size:
            raise ValueError(f"context id {last} outside vocabulary")
        row = self._rows.get(last, self._fallback_row)
        if banned_token_ids:
            row = [p for p in row if p[0] not in banned_token_ids]
        return row[:top_k]

    def tokenize(self, text: str) -> list[int]:
        return [self._word_to_id.get(word, self._unk_id) for word in text.split()]

    def detokenize(self, token_ids: Sequence[int]) -> str:
        words = []
        for tid in token_ids:
            tid = int(tid)
            if 0 <= tid < len(self._vocab):
                words.append(self._vocab[tid])
            elif tid == self._bos_id:
                words.append(BOS_WORD)
            elif tid == self._eos_id:
                words.append(EOS_WORD)
            elif tid == self._unk_id:
                words.append("<unk>")
            else:
                raise ValueError(f"token id {tid} outside vocabulary")
        return " ".join(words)

    # -- alignment side --------------------------------------------------

    @property
    def backend_id(self) -> str:
        return self._backend_id

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def logit_scale(self) -> float:
        return self._logit_scale

    @property
    def max_text_tokens(self) -> int:
        return MAX_TEXT_TOKENS

    @property
    def vocab(self) -> tuple[str, ...]:
        return self._vocab

    @property
    def embed_matrix(self) -> np.ndarray:
        """Read-only (n, dim) float64 matrix of per-word embedding rows."""
        return self._embed

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        return [len(text.split()) for text in texts]

    def embed_text(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out = []
        for i, text in enumerate(texts):
            words = text.split()
            if len(words) > MAX_TEXT_TOKENS:
                raise TokenBudgetError(
                    f"text {i} has {len(words)} alignment tokens (limit {MAX_TEXT_TOKENS})",
                    index=i,
                )
            if not words:
                if self._empty_embedding is None:
                    raise DegenerateEmbeddingError(
                        f"text {i} is empty and the mean embedding row is zero"
                    )
                out.append(EmbeddingVector(self._empty_embedding))
                continue
            vec = np.zeros(self._dim, dtype=np.float64)
            for word in words:
                wid = self._word_to_id.get(word)
                if wid is not None:
                    vec = vec + self._embed[wid]
            norm = math.sqrt(float((vec * vec).sum()))
            if norm == 0.0:
                raise DegenerateEmbeddingError(f"text {i} ({text!r}) embeds to the zero vector")
            out.append(EmbeddingVector(vec / norm))
        return out

    def embed_image(self, image: bytes) -> EmbeddingVector:
        try:
            ref = image.decode("utf-8") if isinstance(image, (bytes, bytearray)) else str(image)
        except UnicodeDecodeError as exc:
            raise MediaError(f"image bytes are not a fixture reference: {exc}") from exc
        if not ref.startswith("fixture:"):
            raise MediaError(f"toy images must look like 'fixture:NAME', got {ref[:40]!r}")
        name = ref[len("fixture:"):]
        try:
            return self._fixtures[name]
        except KeyError:
            raise MediaError(f"no image fixture named {name!r}") from None
