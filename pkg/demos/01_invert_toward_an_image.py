"""Invert an image into a prompt with the in-process toy backend.

The toy backend packs a whole model into one dict: a bigram language model,
an embedding row per word, and named image fixtures. That is enough to watch
the full decode loop run — beam init from the vocabulary cache, guided
expansion, pruning, and termination — with no model weights involved.
"""

from vgd import DecodeConfig, align_report, invert, make_toy_session

# A 6-word world. "sunset over water" is the scene the fixture encodes, the
# bigram table mildly prefers fluent orderings, and logit_scale plays the
# role of CLIP's temperature.
TOY_CONFIG = {
    "dim": 4,
    "vocab": ["sunset", "water", "over", "neon", "city", "rain"],
    "embed": [
        [0.9, 0.1, 0.0, 0.0],   # sunset
        [0.0, 0.9, 0.1, 0.0],   # water
        [0.2, 0.2, 0.6, 0.0],   # over
        [0.0, 0.0, 0.1, 0.9],   # neon
        [0.1, 0.0, 0.2, 0.8],   # city
        [0.0, 0.3, 0.0, 0.7],   # rain
    ],
    "bigram": {
        "<bos>": {"sunset": 3.0, "neon": 2.0, "water": 1.0, "city": 1.0},
        "sunset": {"over": 4.0, "water": 1.0, "<eos>": 1.0},
        "over": {"water": 4.0, "city": 2.0},
        "neon": {"city": 4.0, "rain": 1.0},
        "city": {"rain": 3.0, "<eos>": 2.0},
        "water": {"<eos>": 3.0, "rain": 1.0},
    },
    "fixtures": {
        "sunset_photo": [0.55, 0.55, 0.3, 0.0],
        "city_photo": [0.05, 0.1, 0.15, 0.8],
    },
    "logit_scale": 8.0,
}

session = make_toy_session(TOY_CONFIG)

# Images are fixture references in the toy world; real backends take bytes.
image = b"fixture:sunset_photo"

result = invert(image, session, DecodeConfig(beam_width=4, max_clip_tokens=4))

print(f"prompt: {result.prompt!r}")
print(f"score:  {result.score:.4f}  (alignment {result.align_score:.4f}"
      f" + fluency {result.lm_logprob_sum:.4f} weighted)")
print(f"stopped because: {result.termination_reason}")
print()

# The trace records one line per search step: how many children were scored,
# how many beams survived pruning, and the best complete score so far.
print("step  expanded  survivors  best-so-far")
for step in result.trace.steps:
    print(f"{step['step']:>4}  {step['expanded_count']:>8}"
          f"  {len(step['survivors']):>9}  {step['best_score_so_far']:.4f}")
print()

# Same scoring path, as a standalone report — handy for eyeballing prompts.
for prompt in (result.prompt, "neon city rain", "water"):
    report = align_report(prompt, image, session)
    print(f"{prompt!r}: cosine {report['cosine']:.4f}, "
          f"scaled {report['scaled']:.4f}, {report['token_count']} tokens")
