"""Exception hierarchy shared across the library.

Every error carries a stable ``error_code`` so the gateway wire protocol can
round-trip failures: servers put the code in the JSON error body, the client
maps it back to the matching exception class.
"""

from __future__ import annotations


class VgdError(Exception):
    """Base class for all library errors."""

    error_code = "error"


class InvalidScoreError(VgdError):
    """A score input was non-finite."""

    error_code = "invalid_score"


class DegenerateEmbeddingError(VgdError):
    """An embedding had zero norm and cannot be compared."""

    error_code = "degenerate_embedding"


class DimensionError(VgdError):
    """Embedding dimensions do not match."""

    error_code = "dimension"


class InvalidTargetError(VgdError):
    """A target specification is malformed (wrong kind or cardinality)."""

    error_code = "invalid_target"


class TokenBudgetError(VgdError):
    """A text exceeds the alignment tokenizer's token budget.

    ``index`` is the position of the offending text in the submitted batch,
    or None when the check was not batched.
    """

    error_code = "token_budget"

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class TransportError(VgdError):
    """The gateway could not be reached or returned a malformed response."""

    error_code = "transport"


class ContextLengthError(VgdError):
    """The LM context exceeds the model's limit."""

    error_code = "context_length"


class ExpansionExhaustedError(VgdError):
    """Beam expansion produced no candidates at all."""

    error_code = "expansion_exhausted"


class EmptySearchError(VgdError):
    """The very first expansion produced nothing to search."""

    error_code = "empty_search"


class TemplateNotFoundError(VgdError):
    """No template registered under the requested id."""

    error_code = "template_not_found"


class TemplateBindingError(VgdError):
    """A template placeholder was left unbound at render time."""

    error_code = "template_binding"


class MediaError(VgdError):
    """An image payload could not be decoded."""

    error_code = "media"


class NothingToDistillError(VgdError):
    """The requested distillation budget does not shorten the prompt."""

    error_code = "nothing_to_distill"


class ConfigError(VgdError):
    """A decode configuration value is out of range."""

    error_code = "config"


class CacheFormatError(VgdError):
    """A vocabulary cache file is malformed or inconsistent."""

    error_code = "cache_format"


#: error_code -> exception class, used by the gateway client to rehydrate
#: typed errors from HTTP 4xx bodies.
ERROR_CODE_MAP = {
    cls.error_code: cls
    for cls in (
        InvalidScoreError,
        DegenerateEmbeddingError,
        DimensionError,
        InvalidTargetError,
        TokenBudgetError,
        TransportError,
        ContextLengthError,
        ExpansionExhaustedError,
        EmptySearchError,
        TemplateNotFoundError,
        TemplateBindingError,
        MediaError,
        NothingToDistillError,
        ConfigError,
        CacheFormatError,
    )
}
