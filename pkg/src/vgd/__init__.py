"""Visually guided decoding: beam-search prompts that match an image.

A gradient-free decoder that asks a language model for likely next tokens
and an image-text alignment model for which candidates point at the target,
yielding human-readable prompts. Ships with a deterministic toy backend for
tests and demos, and an HTTP client for a model gateway serving real
checkpoints.
"""

from .backends import (
    AlignScorer,
    GatewayClient,
    LmScorer,
    ScorerSession,
    ToyBackend,
    VocabCache,
    build_vocab_cache,
    make_gateway_session,
    make_toy_session,
)
from .conformance import ConformanceFailure, check_transport_error, run_conformance
from .core import (
    DecodeConfig,
    EmbeddingVector,
    Hypothesis,
    TargetSpec,
    batch_target_alignment,
    combined_score,
    cosine_alignment,
    target_alignment,
)
from .engine import BeamState, DecodeResult, decode, expand, init_beams, prune
from .errors import VgdError
from .tasks import align_report, distill, fuse, invert, style
from .templates import BUILTIN_TEMPLATES, CHAT_FORMATS, ChatFormat, PromptTemplate, load_templates
from .trace import DecodeTrace, replay_trace

__version__ = "0.1.0"

__all__ = [
    "AlignScorer",
    "BUILTIN_TEMPLATES",
    "BeamState",
    "CHAT_FORMATS",
    "ChatFormat",
    "ConformanceFailure",
    "DecodeConfig",
    "DecodeResult",
    "DecodeTrace",
    "EmbeddingVector",
    "GatewayClient",
    "Hypothesis",
    "LmScorer",
    "PromptTemplate",
    "ScorerSession",
    "TargetSpec",
    "ToyBackend",
    "VgdError",
    "VocabCache",
    "align_report",
    "batch_target_alignment",
    "build_vocab_cache",
    "check_transport_error",
    "combined_score",
    "cosine_alignment",
    "decode",
    "distill",
    "expand",
    "fuse",
    "init_beams",
    "invert",
    "load_templates",
    "make_gateway_session",
    "make_toy_session",
    "prune",
    "replay_trace",
    "run_conformance",
    "style",
    "target_alignment",
    "__version__",
]
