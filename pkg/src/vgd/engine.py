"""Guided beam search over LM tokens, scored by target alignment.

One decode iterates: initialize a prefix from the vocabulary cache, then
repeatedly expand every live beam with its top-K next tokens and prune the
expanded set back to K by combined score. The search is gradient-free; the
LM proposes, the alignment scorer disposes.

Termination is global and conservative: the run stops the first time the
best expanded candidate fails to beat the best score seen so far (exact
float comparison, ties lose), when every beam has terminated, or when every
beam has reached the token budget. Hypotheses whose children would leave the
budget, and hypotheses that emit EOS, retire into a terminated pool that
competes in final selection.

Everything is deterministic: scorers are deterministic, ties break by token
id, and candidate scoring happens in one batched call whose floats match the
single-text path bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .backends.base import ScorerSession
from .core import (
    DecodeConfig,
    Hypothesis,
    TargetSpec,
    batch_target_alignment,
    combined_score,
    target_alignment,
)
from .errors import (
    ConfigError,
    DimensionError,
    EmptySearchError,
    ExpansionExhaustedError,
)
from .templates import render_context
from .trace import DecodeTrace

#: Values DecodeResult.termination_reason can take.
TERMINATION_REASONS = ("no_improvement", "all_terminated", "budget_exhausted")


@dataclass(frozen=True)
class BeamState:
    """Search state between steps.

    ``beams`` are the live hypotheses, sorted best-first;
    ``terminated_pool`` holds retired hypotheses (EOS or budget), which still
    compete in final selection. ``best_score_so_far`` is the maximum combined
    score over both.
    """

    step: int
    beams: tuple[Hypothesis, ...]
    terminated_pool: tuple[Hypothesis, ...]
    best_score_so_far: float

    def check_invariants(self, beam_width: int) -> None:
        """Assert the documented invariants; used by tests."""
        assert len(self.beams) <= beam_width
        keys = [b.sort_key() for b in self.beams]
        assert keys == sorted(keys), "beams must be sorted best-first"
        everyone = self.beams + self.terminated_pool
        if everyone:
            top = max(h.combined_score for h in everyone)
            assert self.best_score_so_far == top, (
                f"best_score_so_far {self.best_score_so_far} != pool max {top}"
            )


@dataclass(frozen=True)
class DecodeResult:
    prompt: str
    score: float
    align_score: float
    lm_logprob_sum: float
    steps: int
    termination_reason: str
    hypothesis: Hypothesis
    trace: DecodeTrace


def resolve_scale(config: DecodeConfig, session: ScorerSession) -> float:
    """The logit scale a decode actually uses (config wins over backend)."""
    return config.logit_scale if config.logit_scale is not None else session.align.logit_scale


def _scoring_bans(session: ScorerSession, config: DecodeConfig) -> frozenset[int]:
    """Ids excluded from expansion: all bans except EOS, which the engine
    must see to retire hypotheses."""
    banned = session.lm.banned_token_ids | config.banned_token_ids
    eos = session.lm.eos_token_id
    return banned - {eos} if eos is not None else banned


def init_beams(
    target: TargetSpec, session: ScorerSession, config: DecodeConfig
) -> Hypothesis:
    """Build the initial hypothesis from the top-M cached vocabulary tokens.

    The M best-aligned tokens are joined by spaces in descending score
    order, re-tokenized under the LM tokenizer, and scored; the prefix
    carries zero LM log-prob (it is given, not generated). M=0 yields the
    empty prefix, and llm_only mode always starts empty — its output must
    not depend on the target in any way, and an alignment-ranked prefix
    would smuggle the target in.
    """
    scale = resolve_scale(config, session)
    m = 0 if config.mode == "llm_only" else config.init_tokens
    if m > 0:
        cache = session.vocab_cache
        if cache is None:
            raise ConfigError("beam initialization with init_tokens > 0 needs a vocabulary cache")
        if cache.dim != target.dim:
            raise DimensionError(
                f"vocabulary cache is {cache.dim}-d but target is {target.dim}-d"
            )
        hits = cache.top_m(target, m)
        text = " ".join(hit.token for hit in hits)
        token_ids = tuple(session.lm.tokenize(text))
    else:
        text = ""
        token_ids = ()
    emb = session.align.embed_text([text])[0]
    align = target_alignment(emb, target, scale)
    clip_count = session.align.count_tokens([text])[0]
    return Hypothesis(
        lm_token_ids=token_ids,
        text=text,
        lm_logprob_sum=0.0,
        align_score=align,
        combined_score=combined_score(align, 0.0, config.alpha, config.mode),
        terminated=False,
        clip_token_count=clip_count,
    )


def expand(
    state: BeamState,
    session: ScorerSession,
    config: DecodeConfig,
    context_ids: tuple[int, ...],
) -> tuple[list[Hypothesis], list[Hypothesis]]:
    """Expand every live beam with its top-K next tokens.

    Returns ``(candidates, pooled_parents)``: unscored child hypotheses, and
    parents retired into the terminated pool because a child emitted EOS or
    would exceed the token budget. Children sharing a parent and identical
    detokenized text collapse to the higher LM log-prob (tokenizer aliasing).

    Raises an expansion-exhausted error when no beam produced any child at
    all (every candidate banned).
    """
    if not state.beams:
        raise ValueError("expand needs at least one live beam")
    banned = _scoring_bans(session, config)
    eos = session.lm.eos_token_id

    raw_children = 0
    children: list[Hypothesis] = []
    pooled: list[Hypothesis] = []
    for beam in state.beams:
        rows = session.lm.next_logprobs(
            context_ids + beam.lm_token_ids, top_k=config.beam_width, banned_token_ids=banned
        )
        raw_children += len(rows)
        parent_pooled = False
        by_text: dict[str, Hypothesis] = {}
        for token_id, logprob in rows:
            if eos is not None and token_id == eos:
                parent_pooled = True
                continue
            child_ids = beam.lm_token_ids + (token_id,)
            child = Hypothesis(
                lm_token_ids=child_ids,
                text=session.lm.detokenize(child_ids),
                lm_logprob_sum=beam.lm_logprob_sum + logprob,
                align_score=float("nan"),
                combined_score=float("nan"),
            )
            kept = by_text.get(child.text)
            if kept is None or (child.lm_logprob_sum, -child.last_token_id) > (
                kept.lm_logprob_sum,
                -kept.last_token_id,
            ):
                by_text[child.text] = child

        beam_children = list(by_text.values())
        if beam_children:
            counts = session.align.count_tokens([c.text for c in beam_children])
            for child, count in zip(beam_children, counts):
                if count > config.max_clip_tokens:
                    parent_pooled = True
                else:
                    children.append(replace(child, clip_token_count=count))
        if parent_pooled:
            pooled.append(replace(beam, terminated=True))

    if raw_children == 0:
        raise ExpansionExhaustedError(
            "no expansion candidates: every next token is banned for every beam"
        )
    return children, pooled


def prune(
    candidates: list[Hypothesis],
    target: TargetSpec,
    session: ScorerSession,
    config: DecodeConfig,
    scale: float | None = None,
) -> list[Hypothesis]:
    """Score all candidates in one batch and keep the best K.

    Returned hypotheses carry their alignment and combined scores and are
    sorted best-first with the deterministic tie break.
    """
    if not candidates:
        raise ValueError("prune needs at least one candidate")
    if scale is None:
        scale = resolve_scale(config, session)
    embeddings = session.align.embed_text([c.text for c in candidates])
    matrix = np.stack([e.values for e in embeddings])
    aligns = batch_target_alignment(matrix, target, scale)
    scored = [
        replace(
            cand,
            align_score=float(a),
            combined_score=combined_score(float(a), cand.lm_logprob_sum, config.alpha, config.mode),
        )
        for cand, a in zip(candidates, aligns)
    ]
    scored.sort(key=Hypothesis.sort_key)
    return scored[: config.beam_width]


def decode(
    target: TargetSpec,
    session: ScorerSession,
    config: DecodeConfig = DecodeConfig(),
    bindings: dict | None = None,
    trace_path=None,
) -> DecodeResult:
    """Run one guided beam search and return the best prompt found.

    ``bindings`` fill template placeholders; ``max_length`` is always bound
    to the token budget. The returned prompt is the bare generated text —
    no chat template, no EOS marker. The full step-by-step trace rides along
    on the result (and is saved to ``trace_path`` when given).
    """
    config.validate()
    if target.dim != session.align.dim:
        raise DimensionError(
            f"target embeddings are {target.dim}-d but the alignment scorer is "
            f"{session.align.dim}-d"
        )
    scale = resolve_scale(config, session)
    all_bindings = {"max_length": config.max_clip_tokens}
    all_bindings.update(bindings or {})
    context_ids = render_context(
        config.template_id, all_bindings, session.chat_format, session.lm, session.templates
    )

    init = init_beams(target, session, config)
    if init.clip_token_count > config.max_clip_tokens:
        raise ConfigError(
            f"initial prefix is already {init.clip_token_count} alignment tokens, over the "
            f"budget of {config.max_clip_tokens}; lower init_tokens or raise max_clip_tokens"
        )
    trace = DecodeTrace.start(
        backend_id=session.backend_id,
        target_kind=target.kind,
        template_id=config.template_id,
        mode=config.mode,
        alpha=config.alpha,
        beam_width=config.beam_width,
        init_tokens=config.init_tokens,
        max_clip_tokens=config.max_clip_tokens,
        logit_scale=scale,
        tie_break=config.tie_break,
        seed=config.seed,
        context_token_count=len(context_ids),
    )
    trace.add_step(
        step=0,
        expanded_count=0,
        pool_additions=0,
        best_expanded=None,
        best_score_so_far=init.combined_score,
        survivors=[init],
        termination_reason=None,
    )

    state = BeamState(
        step=0, beams=(init,), terminated_pool=(), best_score_so_far=init.combined_score
    )
    reason = None
    while True:
        if not state.beams:
            reason = "all_terminated"
            break
        if all(b.clip_token_count >= config.max_clip_tokens for b in state.beams):
            reason = "budget_exhausted"
            break
        try:
            candidates, pooled = expand(state, session, config, context_ids)
        except ExpansionExhaustedError as exc:
            if state.step == 0:
                raise EmptySearchError(str(exc)) from exc
            raise
        pool = state.terminated_pool + tuple(pooled)
        if not candidates:
            # Every child hit EOS or the budget; all parents just retired.
            trace.add_step(
                step=state.step + 1,
                expanded_count=0,
                pool_additions=len(pooled),
                best_expanded=None,
                best_score_so_far=state.best_score_so_far,
                survivors=[],
                termination_reason=None,
            )
            state = BeamState(state.step + 1, (), pool, state.best_score_so_far)
            continue
        survivors = prune(candidates, target, session, config, scale)
        best_expanded = survivors[0].combined_score
        if best_expanded <= state.best_score_so_far:
            reason = "no_improvement"
            trace.add_step(
                step=state.step + 1,
                expanded_count=len(candidates),
                pool_additions=len(pooled),
                best_expanded=best_expanded,
                best_score_so_far=state.best_score_so_far,
                survivors=survivors,
                termination_reason=reason,
            )
            state = BeamState(state.step, state.beams, pool, state.best_score_so_far)
            break
        state = BeamState(state.step + 1, tuple(survivors), pool, best_expanded)
        trace.add_step(
            step=state.step,
            expanded_count=len(candidates),
            pool_additions=len(pooled),
            best_expanded=best_expanded,
            best_score_so_far=best_expanded,
            survivors=survivors,
            termination_reason=None,
        )

    selection = state.beams + state.terminated_pool
    best = min(selection, key=Hypothesis.sort_key)
    trace.finish(prompt=best.text, hyp=best, termination_reason=reason, steps=state.step)
    if trace_path is not None:
        trace.save(trace_path)
    return DecodeResult(
        prompt=best.text,
        score=best.combined_score,
        align_score=best.align_score,
        lm_logprob_sum=best.lm_logprob_sum,
        steps=state.step,
        termination_reason=reason,
        hypothesis=best,
        trace=trace,
    )
