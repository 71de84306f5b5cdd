"""A decode must complete against chat models from different families.

The two fixtures serve different LM architectures behind the same wire
protocol, each advertising a different chat-format convention. The decoder
client is expected to pick the advertised format up from /v1/meta and wrap
hypotheses accordingly — so a full decode completing with a non-empty prompt
on both is the portability statement, not an incidental detail.
"""

import math

import pytest

from vgd import DecodeConfig, TargetSpec, decode, make_gateway_session
from tiny_models import CONTENT_WORDS, tiny_png

SANCTIONED_REASONS = {"no_improvement", "all_terminated", "budget_exhausted"}


def _decode_against(url: str):
    session = make_gateway_session(url, vocab=CONTENT_WORDS)
    target = TargetSpec.image(session.align.embed_image(tiny_png()))
    config = DecodeConfig(beam_width=4, init_tokens=1, max_clip_tokens=3)
    return session, decode(target, session, config)


@pytest.mark.parametrize("fixture_name", ["gpt2_gateway", "llama_gateway"])
def test_decode_completes_with_a_usable_prompt(fixture_name, request):
    url = request.getfixturevalue(fixture_name)
    session, result = _decode_against(url)
    assert result.prompt.strip()
    assert math.isfinite(result.score)
    assert result.termination_reason in SANCTIONED_REASONS
    # Every emitted word is a real vocabulary word, within budget.
    words = result.prompt.split()
    assert 1 <= len(words) <= 3
    assert set(words) <= set(CONTENT_WORDS)
    assert session.align.count_tokens([result.prompt])[0] <= 3


def test_the_two_families_advertise_different_chat_formats(
    gpt2_gateway, llama_gateway
):
    s1, r1 = _decode_against(gpt2_gateway)
    s2, r2 = _decode_against(llama_gateway)
    assert s1.chat_format.name == "llama2"
    assert s2.chat_format.name == "chatml"
    assert s1.chat_format != s2.chat_format
    # Both still produced full results despite the differing role markers.
    assert r1.prompt.strip() and r2.prompt.strip()


def test_repeat_decodes_are_deterministic_over_the_wire(gpt2_gateway):
    _, first = _decode_against(gpt2_gateway)
    _, second = _decode_against(gpt2_gateway)
    assert first.prompt == second.prompt
    assert first.score == second.score
    assert first.termination_reason == second.termination_reason
