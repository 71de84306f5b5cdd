"""Wire-protocol conformance checks, runnable against any gateway.

The same suite drives the in-process mock server in this package's tests and
a real model server: point :func:`run_conformance` at a base URL and it
exercises every endpoint plus the documented error paths, raising
:class:`ConformanceFailure` on the first violation.

Checks avoid assumptions about the served models: sample texts are derived
from the server's own detokenizer, so the suite works for a word-level toy
vocabulary and a byte-pair vocabulary alike.
"""

from __future__ import annotations

from .backends.gateway import GatewayAlign, GatewayClient, GatewayLm
from .errors import MediaError, TokenBudgetError, TransportError, VgdError


class ConformanceFailure(AssertionError):
    """A gateway violated the wire protocol; the message names the check."""


def _fail(check: str, detail: str):
    raise ConformanceFailure(f"[{check}] {detail}")


def _expect(check: str, condition: bool, detail: str) -> None:
    if not condition:
        _fail(check, detail)


def _sample_token_ids(meta, count: int = 3) -> list[int]:
    ids = [t for t in range(meta.vocab_size) if t not in meta.banned_token_ids]
    if not ids:
        _fail("meta", "every token id is banned")
    return ids[:count]


def run_conformance(
    base_url: str, image: bytes | None = None, timeout: float = 30.0
) -> list[str]:
    """Run every check against a live gateway; returns the check names run.

    ``image`` is an image payload the server should accept (backend-specific,
    so the caller supplies it); without one the valid-image check is skipped.
    """
    client = GatewayClient(base_url, timeout=timeout)
    lm = GatewayLm(client)
    align = GatewayAlign(client)
    passed: list[str] = []

    def done(name: str):
        passed.append(name)

    # --- metadata ---------------------------------------------------------
    meta = client.meta()
    _expect("meta", meta.vocab_size > 0, f"vocab_size={meta.vocab_size}")
    _expect("meta", meta.dim > 0, f"dim={meta.dim}")
    _expect("meta", meta.logit_scale > 0, f"logit_scale={meta.logit_scale}")
    _expect("meta", 0 < meta.max_text_tokens, f"max_text_tokens={meta.max_text_tokens}")
    _expect(
        "meta",
        all(0 <= t < meta.vocab_size for t in meta.banned_token_ids),
        f"banned ids out of range: {sorted(meta.banned_token_ids)}",
    )
    done("meta")

    sample_ids = _sample_token_ids(meta)
    sample_texts = [lm.detokenize([t]) for t in sample_ids]

    # --- tokenize / detokenize -------------------------------------------
    for text in sample_texts:
        ids = lm.tokenize(text)
        _expect("tokenize", all(isinstance(t, int) for t in ids), f"non-integer ids for {text!r}")
        _expect(
            "tokenize",
            all(0 <= t < meta.vocab_size for t in ids),
            f"ids out of range for {text!r}: {ids}",
        )
        # Text-level fixpoint: detokenizing the re-tokenized text must not
        # drift (id-level round trips are tokenizer-dependent).
        _expect(
            "detokenize",
            lm.detokenize(ids) == text,
            f"round trip drifted: {text!r} -> {ids} -> {lm.detokenize(ids)!r}",
        )
    done("tokenize_detokenize_roundtrip")

    # --- next_logprobs -----------------------------------------------------
    context = [sample_ids[0]]
    rows = lm.next_logprobs(context, top_k=5)
    _expect("next_logprobs", 1 <= len(rows) <= 5, f"asked top_k=5, got {len(rows)}")
    _expect(
        "next_logprobs",
        all(0 <= t < meta.vocab_size for t, _ in rows),
        f"candidate ids out of range: {rows}",
    )
    _expect(
        "next_logprobs",
        all(lp <= 1e-9 for _, lp in rows),
        f"log-probabilities must be <= 0: {rows}",
    )
    _expect(
        "next_logprobs",
        all(rows[i][1] >= rows[i + 1][1] for i in range(len(rows) - 1)),
        f"candidates not sorted by descending logprob: {rows}",
    )
    _expect(
        "next_logprobs",
        len({t for t, _ in rows}) == len(rows),
        f"duplicate candidate ids: {rows}",
    )
    head = lm.next_logprobs(context, top_k=2)
    _expect(
        "next_logprobs",
        head == rows[: len(head)],
        f"top_k=2 is not a prefix of top_k=5: {head} vs {rows}",
    )
    done("next_logprobs_contract")

    # --- banned-token filtering (client side over the wire) ---------------
    if meta.banned_token_ids:
        filtered = lm.next_logprobs(context, top_k=5, banned_token_ids=meta.banned_token_ids)
        _expect(
            "banned_tokens",
            not ({t for t, _ in filtered} & meta.banned_token_ids),
            f"banned ids leaked through filtering: {filtered}",
        )
        done("banned_token_filtering")

    # --- embeddings --------------------------------------------------------
    embs = align.embed_text(sample_texts)
    _expect("embed_text", len(embs) == len(sample_texts), f"{len(embs)} embeddings")
    for emb in embs:
        _expect("embed_text", emb.dim == meta.dim, f"dim {emb.dim} != meta dim {meta.dim}")
        _expect(
            "embed_text",
            abs(emb.norm() - 1.0) <= 1e-4,
            f"embedding not unit-normalized: |v|={emb.norm()}",
        )
    done("embed_text_contract")

    counts = align.count_tokens(sample_texts)
    _expect("count_tokens", len(counts) == len(sample_texts), f"{len(counts)} counts")
    _expect("count_tokens", all(c >= 1 for c in counts), f"counts must be >= 1: {counts}")
    done("count_tokens_contract")

    if image is not None:
        emb = align.embed_image(image)
        _expect("embed_image", emb.dim == meta.dim, f"dim {emb.dim} != meta dim {meta.dim}")
        _expect(
            "embed_image",
            abs(emb.norm() - 1.0) <= 1e-4,
            f"image embedding not unit-normalized: |v|={emb.norm()}",
        )
        done("embed_image_contract")

    # --- error paths -------------------------------------------------------
    over_length = " ".join(["word"] * (meta.max_text_tokens * 2))
    try:
        align.embed_text([over_length])
        _fail("token_budget", "over-length text was accepted")
    except TokenBudgetError:
        pass
    except VgdError as exc:
        _fail("token_budget", f"expected a token-budget error, got {type(exc).__name__}: {exc}")
    done("error_token_budget")

    try:
        align.embed_image(b"\xff\xfe definitely not an image")
        _fail("media_error", "garbage image bytes were accepted")
    except MediaError:
        pass
    except VgdError as exc:
        _fail("media_error", f"expected a media error, got {type(exc).__name__}: {exc}")
    done("error_bad_image")

    return passed


def check_transport_error(dead_url: str = "http://127.0.0.1:9", timeout: float = 0.2) -> None:
    """Verify the client surfaces unreachable gateways as transport errors."""
    client = GatewayClient(dead_url, timeout=timeout)
    try:
        client.meta()
    except TransportError:
        return
    except Exception as exc:  # pragma: no cover - diagnostic path
        raise ConformanceFailure(
            f"[transport] expected TransportError, got {type(exc).__name__}: {exc}"
        ) from exc
    raise ConformanceFailure("[transport] a dead gateway did not raise")
