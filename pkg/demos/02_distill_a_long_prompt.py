"""Shrink an over-budget prompt while keeping what it meant.

Distillation embeds the long prompt once, then searches for a short prompt
whose embedding points the same way. The long prompt never has to fit any
budget itself — only the replacement does.
"""

from vgd import DecodeConfig, distill, make_toy_session

# Six words with (near-)orthogonal meanings: covering more of the original
# prompt genuinely needs more words, so tightening the budget must cost
# alignment. The bigram table is kept flat — fluency should not be the story.
WORDS = ["oil", "painting", "stormy", "harbor", "dusk", "lanterns"]
UNIFORM_ROW = {**{w: 1.0 for w in WORDS}, "<eos>": 0.5}
TOY_CONFIG = {
    "dim": 6,
    "vocab": WORDS,
    "embed": [[1.0 if i == j else 0.0 for j in range(6)] for i in range(6)],
    "bigram": {ctx: dict(UNIFORM_ROW) for ctx in ["<bos>"] + WORDS},
    "fixtures": {},
    "logit_scale": 14.0,
}

session = make_toy_session(TOY_CONFIG)

long_prompt = ("oil painting stormy harbor dusk lanterns "
               "oil painting stormy harbor dusk lanterns")
budget = 4

print(f"original ({session.align.count_tokens([long_prompt])[0]} tokens):")
print(f"  {long_prompt!r}")
print()

result = distill(long_prompt, budget, session, DecodeConfig(beam_width=6))

short = result.prompt
print(f"distilled to <= {budget} tokens "
      f"({session.align.count_tokens([short])[0]} used):")
print(f"  {short!r}")
print(f"  alignment with the original meaning: {result.align_score:.4f}")
print(f"  stopped because: {result.termination_reason}")

# Tighter budgets trade meaning for size; watch the alignment fall.
print()
print("budget  prompt                        alignment")
for tighter in (3, 2, 1):
    r = distill(long_prompt, tighter, session, DecodeConfig(beam_width=6))
    print(f"{tighter:>6}  {r.prompt!r:<28}  {r.align_score:.4f}")
