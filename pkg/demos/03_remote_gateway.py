"""Decode against a live model gateway instead of the toy backend.

Point this at any server speaking the gateway protocol — for instance the
reference server in gateway/ of this repository:

    vgd-gateway --config gateway.toml          # terminal 1
    python3 demos/03_remote_gateway.py http://127.0.0.1:8137 photo.png

The decoder itself does not change at all: the same decode() runs over the
wire, with the language model and alignment scorer living in another process.
"""

import sys

from vgd import DecodeConfig, TargetSpec, decode, make_gateway_session, run_conformance

if len(sys.argv) < 2:
    sys.exit("usage: 03_remote_gateway.py GATEWAY_URL [IMAGE_FILE]")

url = sys.argv[1]

# First make sure the server actually honors the protocol. This runs the
# same conformance suite the test suite uses, against the live endpoint.
image = None
if len(sys.argv) > 2:
    with open(sys.argv[2], "rb") as fh:
        image = fh.read()

passed = run_conformance(url, image=image)
print(f"gateway at {url} passed {len(passed)} conformance checks:")
for name in passed:
    print(f"  - {name}")
print()

# Beam initialization needs candidate words; with a real 50k-token model you
# supply a curated list rather than scanning the whole vocabulary.
seed_words = [
    "photo", "painting", "portrait", "landscape", "sunset", "night",
    "city", "mountain", "river", "forest", "flower", "bright", "dark",
]
session = make_gateway_session(url, vocab=seed_words)

if image is not None:
    target = TargetSpec.image(session.align.embed_image(image))
    label = "the image"
else:
    # No image handy: aim at a text description instead. Same machinery.
    target = TargetSpec.image(session.align.embed_text(["a bright mountain landscape"])[0])
    label = "'a bright mountain landscape'"

result = decode(target, session, DecodeConfig(beam_width=4, init_tokens=1,
                                              max_clip_tokens=8))
print(f"decoded toward {label}:")
print(f"  prompt: {result.prompt!r}")
print(f"  score {result.score:.4f}, stopped because {result.termination_reason}")
