"""Decode traces: a JSONL record of every step of a beam search.

One header record, one record per step (step 0 is initialization), one final
record. Scores are serialized with full float precision, so replaying a
trace through the scoring function reproduces every recorded combined score
exactly — golden trace files in the test suite rely on this.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import Hypothesis, combined_score
from .errors import ConfigError

TRACE_VERSION = 1


def _hyp_record(hyp: Hypothesis) -> dict:
    return {
        "text": hyp.text,
        "lm_token_ids": list(hyp.lm_token_ids),
        "lm_logprob_sum": hyp.lm_logprob_sum,
        "align_score": hyp.align_score,
        "combined_score": hyp.combined_score,
        "clip_token_count": hyp.clip_token_count,
        "terminated": hyp.terminated,
    }


@dataclass
class DecodeTrace:
    """In-memory trace under construction; serializes to/from JSONL."""

    header: dict
    steps: list[dict] = field(default_factory=list)
    final: dict | None = None

    @classmethod
    def start(cls, **header_fields) -> "DecodeTrace":
        header = {"record": "header", "trace_version": TRACE_VERSION}
        header.update(header_fields)
        return cls(header=header)

    def add_step(
        self,
        step: int,
        expanded_count: int,
        pool_additions: int,
        best_expanded: float | None,
        best_score_so_far: float,
        survivors,
        termination_reason: str | None,
    ) -> None:
        self.steps.append(
            {
                "record": "step",
                "step": step,
                "expanded_count": expanded_count,
                "pool_additions": pool_additions,
                "best_expanded": best_expanded,
                "best_score_so_far": best_score_so_far,
                "termination_reason": termination_reason,
                "survivors": [_hyp_record(h) for h in survivors],
            }
        )

    def finish(self, prompt: str, hyp: Hypothesis, termination_reason: str, steps: int) -> None:
        self.final = {
            "record": "final",
            "prompt": prompt,
            "score": hyp.combined_score,
            "align_score": hyp.align_score,
            "lm_logprob_sum": hyp.lm_logprob_sum,
            "steps": steps,
            "termination_reason": termination_reason,
        }

    def to_jsonl(self) -> str:
        records = [self.header, *self.steps]
        if self.final is not None:
            records.append(self.final)
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> "DecodeTrace":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not records or records[0].get("record") != "header":
            raise ConfigError("trace does not start with a header record")
        header = records[0]
        if header.get("trace_version") != TRACE_VERSION:
            raise ConfigError(f"unsupported trace_version {header.get('trace_version')!r}")
        trace = cls(header=header)
        for rec in records[1:]:
            if rec.get("record") == "step":
                trace.steps.append(rec)
            elif rec.get("record") == "final":
                trace.final = rec
            else:
                raise ConfigError(f"unknown trace record kind {rec.get('record')!r}")
        return trace

    @classmethod
    def load(cls, path) -> "DecodeTrace":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def replay_trace(trace: DecodeTrace) -> int:
    """Recompute every recorded combined score; raise on any mismatch.

    Returns the number of scores verified. Exact float equality is required:
    the serialization round-trips floats losslessly and the objective is a
    pure function of the recorded fields.
    """
    alpha = trace.header["alpha"]
    mode = trace.header["mode"]
    verified = 0
    for rec in trace.steps:
        for surv in rec["survivors"]:
            expected = combined_score(surv["align_score"], surv["lm_logprob_sum"], alpha, mode)
            if expected != surv["combined_score"]:
                raise ConfigError(
                    f"step {rec['step']} survivor {surv['text']!r}: recorded "
                    f"{surv['combined_score']!r} but recomputed {expected!r}"
                )
            verified += 1
    if trace.final is not None:
        expected = combined_score(
            trace.final["align_score"], trace.final["lm_logprob_sum"], alpha, mode
        )
        if expected != trace.final["score"]:
            raise ConfigError(
                f"final record: recorded {trace.final['score']!r} but recomputed {expected!r}"
            )
        verified += 1
    return verified
