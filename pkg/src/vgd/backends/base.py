"""Scorer interfaces the decoder consumes.

Two capabilities back a decode: a language model that tokenizes text and
scores next tokens, and an alignment model that embeds texts and images into
a shared space. A backend may implement both on one object (the toy backend
does) or on two (the gateway client does); the session bundles whichever
pair it is given.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, TYPE_CHECKING

from ..core import EmbeddingVector
from ..templates import ChatFormat, CHAT_FORMATS, PromptTemplate

if TYPE_CHECKING:  # pragma: no cover
    from .cache import VocabCache


class LmScorer(abc.ABC):
    """Next-token scoring plus the LM's own tokenizer."""

    @property
    @abc.abstractmethod
    def vocab_size(self) -> int: ...

    @property
    @abc.abstractmethod
    def eos_token_id(self) -> int | None:
        """Id whose generation retires a hypothesis, or None if unknown."""

    @property
    @abc.abstractmethod
    def banned_token_ids(self) -> frozenset[int]:
        """Special/control ids that must never appear in a decoded prompt."""

    @abc.abstractmethod
    def next_logprobs(
        self,
        context_ids: Sequence[int],
        top_k: int,
        banned_token_ids: frozenset[int] = frozenset(),
    ) -> list[tuple[int, float]]:
        """Top-k (token_id, logprob) continuations of the given context.

        Results are sorted by descending logprob with ties broken by lower
        token id, and never include a banned id. Fewer than ``top_k`` pairs
        come back only when the unbanned vocabulary is smaller than that.
        """

    @abc.abstractmethod
    def tokenize(self, text: str) -> list[int]: ...

    @abc.abstractmethod
    def detokenize(self, token_ids: Sequence[int]) -> str: ...


class AlignScorer(abc.ABC):
    """Text/image embedding into one shared unit-normalized space."""

    @property
    @abc.abstractmethod
    def backend_id(self) -> str:
        """Stable identifier of the embedding space (used to key caches)."""

    @property
    @abc.abstractmethod
    def dim(self) -> int: ...

    @property
    @abc.abstractmethod
    def logit_scale(self) -> float:
        """Scale the backend recommends for scoring cosine similarities."""

    @property
    @abc.abstractmethod
    def max_text_tokens(self) -> int:
        """Hard per-text token limit of the alignment tokenizer."""

    @abc.abstractmethod
    def embed_text(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        """Unit-normalized embeddings, one per input text.

        Raises a token-budget error carrying the offending index if any text
        exceeds :attr:`max_text_tokens`; texts are never silently truncated.
        """

    @abc.abstractmethod
    def embed_image(self, image: bytes) -> EmbeddingVector: ...

    @abc.abstractmethod
    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        """Alignment-tokenizer token counts, one per input text."""


@dataclass(frozen=True)
class ScorerSession:
    """Everything a decode needs from a backend, bundled.

    ``vocab`` is the candidate word list used for beam initialization (for
    the toy backend its content words; for a gateway whatever list the cache
    was built over) and ``vocab_cache`` the precomputed embeddings over it.
    ``templates`` overrides the built-in template registry when not None.
    """

    lm: LmScorer
    align: AlignScorer
    chat_format: ChatFormat = field(default_factory=lambda: CHAT_FORMATS["plain"])
    vocab: tuple[str, ...] = ()
    vocab_cache: "VocabCache | None" = None
    templates: Mapping[str, PromptTemplate] | None = None

    @property
    def backend_id(self) -> str:
        return self.align.backend_id

    def with_cache(self, cache: "VocabCache") -> "ScorerSession":
        return replace(self, vocab_cache=cache, vocab=cache.vocab)
