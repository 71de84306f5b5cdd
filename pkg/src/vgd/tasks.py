"""Task layer: the four prompt applications, each a thin shell over decode().

Every task builds a target, picks its template, and delegates; nothing here
adds state, so outputs are exactly as reproducible as the decode beneath
them.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .backends.base import ScorerSession
from .core import DecodeConfig, TargetSpec, cosine_alignment
from .engine import DecodeResult, decode
from .errors import InvalidTargetError, NothingToDistillError, TokenBudgetError


def invert(
    image: bytes,
    session: ScorerSession,
    config: DecodeConfig = DecodeConfig(),
    trace_path=None,
) -> DecodeResult:
    """Recover a prompt describing one image."""
    target = TargetSpec.image(session.align.embed_image(image))
    return decode(target, session, replace(config, template_id="inversion"), trace_path=trace_path)


def style(
    images: Sequence[bytes],
    session: ScorerSession,
    config: DecodeConfig = DecodeConfig(),
    trace_path=None,
) -> DecodeResult:
    """Extract the shared style of several images as one prompt.

    The target is the set of image embeddings; alignment averages over them,
    so the decode favors what the images have in common.
    """
    if len(images) < 2:
        raise InvalidTargetError(f"style extraction needs at least 2 images, got {len(images)}")
    embeddings = [session.align.embed_image(img) for img in images]
    target = TargetSpec.image_set(embeddings)
    return decode(target, session, replace(config, template_id="style"), trace_path=trace_path)


def distill(
    long_prompt: str,
    max_tokens: int,
    session: ScorerSession,
    config: DecodeConfig = DecodeConfig(),
    trace_path=None,
) -> DecodeResult:
    """Compress a prompt into at most ``max_tokens`` alignment tokens.

    The source prompt's own embedding is the target, so the result is the
    short prompt that best preserves where the long one points.
    """
    if not long_prompt.strip():
        raise InvalidTargetError("cannot distill an empty prompt")
    source_count = session.align.count_tokens([long_prompt])[0]
    if max_tokens >= source_count:
        raise NothingToDistillError(
            f"budget of {max_tokens} tokens does not shorten a {source_count}-token prompt"
        )
    target = TargetSpec.text(session.align.embed_text([long_prompt])[0])
    task_config = replace(config, template_id="distill", max_clip_tokens=max_tokens)
    return decode(
        target,
        session,
        task_config,
        bindings={"target_prompt": long_prompt},
        trace_path=trace_path,
    )


def fuse(prompts: Sequence[str]) -> str:
    """Concatenate independently decoded prompts into one multi-concept
    prompt, preserving order."""
    if len(prompts) < 2:
        raise ValueError(f"fusion needs at least 2 prompts, got {len(prompts)}")
    return ", ".join(prompts)


def align_report(prompt: str, image: bytes, session: ScorerSession) -> dict:
    """How well a prompt matches an image: raw cosine, scaled score, tokens.

    The scaled score uses the backend's advertised logit scale, matching
    what a decode run would have optimized.
    """
    token_count = session.align.count_tokens([prompt])[0]
    if token_count > session.align.max_text_tokens:
        raise TokenBudgetError(
            f"prompt has {token_count} alignment tokens "
            f"(limit {session.align.max_text_tokens})",
            index=0,
        )
    text_emb = session.align.embed_text([prompt])[0]
    image_emb = session.align.embed_image(image)
    cosine = cosine_alignment(text_emb, image_emb, 1.0)
    return {
        "cosine": cosine,
        "scaled": session.align.logit_scale * cosine,
        "token_count": token_count,
    }
