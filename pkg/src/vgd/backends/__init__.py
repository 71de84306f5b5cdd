"""Scorer backends: local toy models and the remote gateway client."""

from __future__ import annotations

from ..templates import CHAT_FORMATS
from .base import AlignScorer, LmScorer, ScorerSession
from .cache import CacheHit, VocabCache, build_vocab_cache
from .gateway import GatewayAlign, GatewayClient, GatewayLm, GatewayMeta
from .toy import ToyBackend

__all__ = [
    "AlignScorer",
    "LmScorer",
    "ScorerSession",
    "CacheHit",
    "VocabCache",
    "build_vocab_cache",
    "GatewayAlign",
    "GatewayClient",
    "GatewayLm",
    "GatewayMeta",
    "ToyBackend",
    "make_toy_session",
    "make_gateway_session",
]


def make_toy_session(source, cache_path=None, build_cache: bool = True) -> ScorerSession:
    """Session over a toy backend given a config path, dict or instance.

    The vocabulary cache is built in-process (or loaded from ``cache_path``
    when that file exists) unless ``build_cache`` is False.
    """
    if isinstance(source, ToyBackend):
        backend = source
    elif isinstance(source, dict):
        backend = ToyBackend(source)
    else:
        backend = ToyBackend.from_file(source)
    session = ScorerSession(
        lm=backend,
        align=backend,
        chat_format=CHAT_FORMATS["plain"],
        vocab=backend.vocab,
    )
    if not build_cache:
        return session
    if cache_path is not None:
        from pathlib import Path

        if Path(cache_path).exists():
            return session.with_cache(VocabCache.load(cache_path, backend.vocab))
    cache = build_vocab_cache(backend, backend.vocab, path=cache_path)
    return session.with_cache(cache)


def make_gateway_session(
    base_url: str,
    vocab=None,
    cache_path=None,
    timeout: float = 60.0,
) -> ScorerSession:
    """Session over a remote gateway.

    Beam initialization needs a candidate vocabulary; pass ``vocab`` (token
    strings) to build its cache over the wire, or ``cache_path`` plus
    ``vocab`` to load a previously built one. With neither, decodes must
    supply explicit initial prompts. The chat format advertised by the
    gateway (when present) replaces the plain format.
    """
    client = GatewayClient(base_url, timeout=timeout)
    meta = client.meta()
    session = ScorerSession(
        lm=GatewayLm(client),
        align=GatewayAlign(client),
        chat_format=meta.chat_format if meta.chat_format is not None else CHAT_FORMATS["plain"],
        vocab=tuple(vocab) if vocab is not None else (),
    )
    if vocab is None:
        return session
    if cache_path is not None:
        from pathlib import Path

        if Path(cache_path).exists():
            return session.with_cache(VocabCache.load(cache_path, session.vocab))
    cache = build_vocab_cache(session.align, session.vocab, path=cache_path)
    return session.with_cache(cache)
