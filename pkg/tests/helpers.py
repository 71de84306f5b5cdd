"""Shared test fixtures: toy configs, random instances, brute-force oracle."""

from __future__ import annotations

import itertools

import numpy as np

from vgd import DecodeConfig, combined_score, make_toy_session, target_alignment
from vgd.templates import render_context


def hand_toy_config() -> dict:
    """Tiny config whose every number is checkable by hand.

    ids: a=0, b=1, c=2, bos=3, eos=4, unk=5. Rows: a->[1,0], b->[0,1],
    c->[1,1]. P(b|a)=0.9, P(c|a)=0.1.
    """
    return {
        "dim": 2,
        "vocab": ["a", "b", "c"],
        "embed": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        "bigram": {
            "<bos>": {"a": 1.0},
            "a": {"b": 0.9, "c": 0.1},
            "b": {"a": 0.5, "c": 0.5},
            "c": {"a": 1.0},
        },
        "fixtures": {
            "cat": [0.6, 0.8],
            "east": [1.0, 0.0],
            "north": [0.0, 1.0],
        },
        "logit_scale": 2.0,
    }


def random_instance(
    seed: int,
    n_vocab: int = 6,
    dim: int = 4,
    eos_weight: float = 0.0,
    logit_scale: float = 5.0,
) -> dict:
    """A fully random (but valid) toy config; used for fuzzing."""
    rng = np.random.default_rng(seed)
    vocab = [f"w{i}" for i in range(n_vocab)]
    embed = rng.normal(size=(n_vocab, dim)).round(6).tolist()
    bigram = {}
    for ctx in ["<bos>"] + vocab:
        row = {w: round(float(rng.uniform(0.05, 1.0)), 6) for w in vocab}
        if eos_weight > 0:
            row["<eos>"] = round(float(rng.uniform(0.0, eos_weight)), 6) or eos_weight
        bigram[ctx] = row
    fixtures = {}
    for name in ("one", "two", "three", "four"):
        v = rng.normal(size=dim)
        fixtures[name] = (v / np.linalg.norm(v)).round(6).tolist()
    return {
        "dim": dim,
        "vocab": vocab,
        "embed": embed,
        "bigram": bigram,
        "fixtures": fixtures,
        "logit_scale": logit_scale,
    }


def planted_instance(seed: int, max_len: int = 3, n_vocab: int | None = None) -> tuple[dict, str]:
    """A toy config plus a fixture name whose target is a noisy bag of a
    planted word sequence.

    Tuned so the best-aligned prompt is reachable by monotone score growth:
    alignment gains along the planted path dominate the per-step LM cost,
    and gains diminish with depth so the score never dips and then rebounds.
    Used by the exhaustive-search equivalence tests.
    """
    rng = np.random.default_rng(seed)
    if n_vocab is None:
        n_vocab = int(rng.integers(4, 9))
    dim = int(rng.integers(4, 8))
    vocab = [f"w{i}" for i in range(n_vocab)]
    embed = rng.normal(size=(n_vocab, dim))
    embed = embed / np.linalg.norm(embed, axis=1, keepdims=True)
    planted = rng.choice(n_vocab, size=max_len, replace=False)
    bag = embed[planted].sum(axis=0)
    noise = rng.normal(size=dim) * 0.05
    target = bag / np.linalg.norm(bag) + noise
    target = target / np.linalg.norm(target)
    bigram = {}
    for ctx in ["<bos>"] + vocab:
        row = {w: round(float(rng.uniform(0.4, 1.0)), 6) for w in vocab}
        bigram[ctx] = row
    config = {
        "dim": dim,
        "vocab": vocab,
        "embed": embed.round(6).tolist(),
        "bigram": bigram,
        "fixtures": {"planted": target.round(6).tolist()},
        "logit_scale": 10.0,
    }
    return config, "planted"


def ablation_instance(seed: int, max_len: int = 3) -> tuple[dict, str]:
    """Like planted_instance, but the target is orthogonalized against the
    mean vocabulary direction.

    The toy embedder maps empty text to the normalized vocabulary mean, so
    without this the unguided baseline would sit unrealistically close to
    bag-of-token targets. Real contrastive embedders give an empty caption
    no particular affinity for any one image; this family restores that.
    """
    rng = np.random.default_rng(seed)
    n_vocab = int(rng.integers(6, 9))
    dim = int(rng.integers(4, 8))
    vocab = [f"w{i}" for i in range(n_vocab)]
    embed = rng.normal(size=(n_vocab, dim))
    embed = embed / np.linalg.norm(embed, axis=1, keepdims=True)
    planted = rng.choice(n_vocab, size=max_len, replace=False)
    bag = embed[planted].sum(axis=0)
    mean = embed.mean(axis=0)
    mean = mean / np.linalg.norm(mean)
    bag = bag - (bag @ mean) * mean
    bag = bag / np.linalg.norm(bag)
    target = bag + rng.normal(size=dim) * 0.05
    target = target / np.linalg.norm(target)
    bigram = {
        ctx: {w: round(float(rng.uniform(0.4, 1.0)), 6) for w in vocab}
        for ctx in ["<bos>"] + vocab
    }
    config = {
        "dim": dim,
        "vocab": vocab,
        "embed": embed.round(6).tolist(),
        "bigram": bigram,
        "fixtures": {"planted": target.round(6).tolist()},
        "logit_scale": 10.0,
    }
    return config, "planted"


def oracle_instance(seed: int, max_len: int = 3) -> tuple[dict, str]:
    """A family on which exhaustive enumeration and the beam search must agree.

    The decoder stops once a whole depth fails to improve on the best score
    so far, so exact agreement with enumeration needs instances whose
    depth-wise maxima keep climbing until the true optimum. Three things
    arrange that: the target is a bag of token vectors orthogonalized
    exactly against the mean vocabulary direction (the empty prompt embeds
    to that mean, so it scores ~0); the transition table is near-uniform so
    per-step fluency penalties are flat; and the logit scale is high enough
    that each planted token recovered outweighs one step of fluency penalty.
    """
    rng = np.random.default_rng(70001 + seed)
    n_vocab = int(rng.integers(6, 9))
    vocab = [f"w{i}" for i in range(n_vocab)]
    # orthonormal token vectors (a random rotation of the identity basis):
    # with equal-weight bags the depth-wise cosine gains have closed forms
    # that beat the flat fluency penalty at every depth, for all n in 6..8
    embed, _ = np.linalg.qr(rng.normal(size=(n_vocab, n_vocab)))
    planted = rng.choice(n_vocab, size=max_len, replace=False)
    bag = embed[planted].sum(axis=0)
    mean = embed.mean(axis=0)
    mean = mean / np.linalg.norm(mean)
    bag = bag - (bag @ mean) * mean
    target = bag / np.linalg.norm(bag)
    bigram = {
        ctx: {w: round(float(rng.uniform(0.9, 1.1)), 6) for w in vocab}
        for ctx in ["<bos>"] + vocab
    }
    config = {
        "dim": n_vocab,
        "vocab": vocab,
        "embed": embed.tolist(),
        "bigram": bigram,
        "fixtures": {"planted": target.tolist()},
        "logit_scale": 15.0,
    }
    return config, "planted"


def assert_trace_sound(trace) -> None:
    """Check the termination contract against a finished trace.

    best_score_so_far must strictly increase across committed expansion
    steps, and the run must end for one of the three sanctioned reasons,
    with a no-improvement ending backed by a recorded failed expansion.
    """
    assert trace.final is not None, "trace has no final record"
    reason = trace.final["termination_reason"]
    assert reason in ("no_improvement", "all_terminated", "budget_exhausted")

    committed = [
        rec
        for rec in trace.steps
        if rec["step"] >= 1 and rec["termination_reason"] is None and rec["expanded_count"] > 0
    ]
    bests = [trace.steps[0]["best_score_so_far"]] + [r["best_score_so_far"] for r in committed]
    for earlier, later in zip(bests, bests[1:]):
        assert later > earlier, f"best_score_so_far did not increase: {earlier} -> {later}"

    if reason == "no_improvement":
        last = trace.steps[-1]
        assert last["termination_reason"] == "no_improvement"
        assert last["best_expanded"] is not None
        assert last["best_expanded"] <= last["best_score_so_far"]
    else:
        # budget_exhausted and all_terminated end at the loop head; any
        # trailing step record is a retire-everyone step, not an expansion.
        for rec in trace.steps:
            assert rec["termination_reason"] is None

    budget = trace.header["max_clip_tokens"]
    for rec in trace.steps:
        for surv in rec["survivors"]:
            assert surv["clip_token_count"] <= budget, (
                f"survivor {surv['text']!r} is {surv['clip_token_count']} alignment tokens, "
                f"over the budget of {budget}"
            )


def enumerate_sequences(vocab_size: int, max_len: int):
    """Every content-token id sequence of length 0..max_len."""
    yield ()
    for length in range(1, max_len + 1):
        yield from itertools.product(range(vocab_size), repeat=length)


def brute_force_best(session, target, config: DecodeConfig, bindings: dict | None = None):
    """Exhaustive maximum of the decoding objective over the full sequence
    space the search can reach with M=0.

    Enumerates independently of the beam engine but scores through the same
    functions, so an engine that searches correctly must match it float for
    float. Returns (best_text, best_score).
    """
    lm = session.lm
    align = session.align
    scale = config.logit_scale if config.logit_scale is not None else align.logit_scale
    n_content = len(session.vocab)
    all_bindings = {"max_length": config.max_clip_tokens}
    all_bindings.update(bindings or {})
    context = render_context(
        config.template_id, all_bindings, session.chat_format, lm, session.templates
    )

    row_cache: dict[int, dict[int, float]] = {}

    def logprob_of(ctx: tuple[int, ...], token_id: int) -> float | None:
        # The toy LM is context-last-token only, so rows can be memoized.
        last = ctx[-1]
        if last not in row_cache:
            row_cache[last] = dict(lm.next_logprobs(ctx, top_k=lm.vocab_size))
        return row_cache[last].get(token_id)

    best_text, best_score = None, -float("inf")
    for seq in enumerate_sequences(n_content, config.max_clip_tokens):
        lm_sum = 0.0
        ctx = context
        reachable = True
        for tid in seq:
            step = logprob_of(ctx, tid)
            if step is None:  # zero-probability transition: unreachable
                reachable = False
                break
            lm_sum = lm_sum + step
            ctx = ctx + (tid,)
        if not reachable:
            continue
        text = lm.detokenize(seq)
        emb = align.embed_text([text])[0]
        score = combined_score(
            target_alignment(emb, target, scale), lm_sum, config.alpha, config.mode
        )
        if score > best_score:
            best_text, best_score = text, score
    return best_text, best_score


def make_session(config: dict):
    return make_toy_session(config)
