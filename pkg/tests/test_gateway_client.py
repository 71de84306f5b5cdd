"""HTTP client against the in-process mock gateway: parity with the local
backend, typed error mapping, and transport failure handling."""

import json
import math
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from helpers import hand_toy_config, random_instance
from mock_gateway import serve_toy_gateway
from vgd import (
    ConformanceFailure,
    DecodeConfig,
    GatewayClient,
    TargetSpec,
    ToyBackend,
    check_transport_error,
    decode,
    make_gateway_session,
    make_toy_session,
    run_conformance,
)
from vgd.backends.gateway import GatewayAlign, GatewayLm
from vgd.errors import MediaError, TokenBudgetError, TransportError


@pytest.fixture(scope="module")
def toy():
    return ToyBackend(hand_toy_config())


@pytest.fixture(scope="module")
def gateway_url(toy):
    with serve_toy_gateway(toy) as url:
        yield url


@pytest.fixture(scope="module")
def client(gateway_url):
    return GatewayClient(gateway_url)


class TestMeta:
    def test_fields_mirror_the_served_backend(self, client, toy):
        meta = client.meta()
        assert meta.vocab_size == toy.vocab_size
        assert meta.dim == toy.dim
        assert meta.logit_scale == toy.logit_scale
        assert meta.max_text_tokens == toy.max_text_tokens
        assert meta.banned_token_ids == toy.banned_token_ids

    def test_optional_extensions_are_parsed(self, client, toy):
        meta = client.meta()
        assert meta.eos_token_id == toy.eos_token_id
        assert meta.chat_format.name == "plain"

    def test_meta_is_cached_until_refresh(self, client):
        assert client.meta() is client.meta()
        assert client.meta(refresh=True) is not None


class TestLmParity:
    def test_tokenize_matches_local(self, client, toy):
        lm = GatewayLm(client)
        for text in ("a b c", "c c", "a mystery word"):
            assert lm.tokenize(text) == toy.tokenize(text)

    def test_detokenize_matches_local(self, client, toy):
        lm = GatewayLm(client)
        for ids in ([0], [2, 0, 1], [5]):
            assert lm.detokenize(ids) == toy.detokenize(ids)

    def test_next_logprobs_matches_local_exactly(self, client, toy):
        lm = GatewayLm(client)
        for context in ([0], [2], [1, 0]):
            remote = lm.next_logprobs(context, top_k=4)
            local = toy.next_logprobs(context, top_k=4)
            assert remote == local  # floats round-trip JSON losslessly

    def test_vocab_size_and_specials(self, client, toy):
        lm = GatewayLm(client)
        assert lm.vocab_size == toy.vocab_size
        assert lm.eos_token_id == toy.eos_token_id
        assert lm.banned_token_ids == toy.banned_token_ids

    def test_banned_filtering_happens_client_side(self, client, toy):
        lm = GatewayLm(client)
        banned = frozenset({0}) | toy.banned_token_ids
        rows = lm.next_logprobs([1], top_k=4, banned_token_ids=banned)
        assert rows  # row b still offers token c
        assert not ({t for t, _ in rows} & banned)
        assert rows == [r for r in toy.next_logprobs([1], top_k=9) if r[0] not in banned][:4]

    def test_heavily_banned_row_still_fills_the_request(self):
        spec = random_instance(7, n_vocab=8)
        backend = ToyBackend(spec)
        with serve_toy_gateway(backend) as url:
            lm = GatewayLm(GatewayClient(url))
            banned = frozenset(range(6)) | backend.banned_token_ids  # leave ids 6,7
            rows = lm.next_logprobs([0], top_k=2, banned_token_ids=banned)
            assert [t for t, _ in rows] in ([6, 7], [7, 6])
            assert not ({t for t, _ in rows} & banned)


class TestAlignParity:
    def test_embed_text_round_trips_floats_exactly(self, client, toy):
        align = GatewayAlign(client)
        texts = ["a", "c b", "", "a a c"]
        remote = align.embed_text(texts)
        local = toy.embed_text(texts)
        for r, l in zip(remote, local):
            assert r.values.tolist() == l.values.tolist()

    def test_embed_image_matches_local(self, client, toy):
        align = GatewayAlign(client)
        assert (
            align.embed_image(b"fixture:cat").values.tolist()
            == toy.embed_image(b"fixture:cat").values.tolist()
        )

    def test_count_tokens_matches_local(self, client, toy):
        align = GatewayAlign(client)
        texts = ["a b", "", "one two three four"]
        assert align.count_tokens(texts) == toy.count_tokens(texts)

    def test_metadata_properties(self, client, toy):
        align = GatewayAlign(client)
        assert align.dim == toy.dim
        assert align.logit_scale == toy.logit_scale
        assert align.max_text_tokens == toy.max_text_tokens
        assert align.backend_id.startswith("gateway:")


class TestErrorMapping:
    def test_over_length_text_raises_token_budget_with_index(self, client):
        align = GatewayAlign(client)
        long_text = " ".join(["a"] * 100)
        with pytest.raises(TokenBudgetError) as err:
            align.embed_text(["a", long_text])
        assert err.value.index == 1

    def test_garbage_image_bytes_raise_media_error(self, client):
        with pytest.raises(MediaError):
            GatewayAlign(client).embed_image(b"\xff\xfe not utf-8 image bytes")

    def test_unknown_fixture_raises_media_error(self, client):
        with pytest.raises(MediaError):
            GatewayAlign(client).embed_image(b"fixture:nonexistent")


class TestTransportFailures:
    def test_unreachable_host(self):
        client = GatewayClient("http://127.0.0.1:9", timeout=0.2)
        with pytest.raises(TransportError):
            client.meta()

    def test_server_error_5xx(self, misbehaving_url):
        with pytest.raises(TransportError):
            GatewayClient(misbehaving_url + "/m500").meta()

    def test_non_json_success_body(self, misbehaving_url):
        with pytest.raises(TransportError):
            GatewayClient(misbehaving_url + "/nonjson").meta()

    def test_unknown_error_code_falls_back_to_transport(self, misbehaving_url):
        with pytest.raises(TransportError):
            GatewayClient(misbehaving_url + "/weird").meta()

    def test_non_json_error_body(self, misbehaving_url):
        with pytest.raises(TransportError):
            GatewayClient(misbehaving_url + "/garbled").meta()


class _MisbehavingHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _reply(self, status, body, content_type="application/json"):
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        if self.path.startswith("/m500"):
            self._reply(500, json.dumps({"error": "internal"}))
        elif self.path.startswith("/nonjson"):
            self._reply(200, "hello there", content_type="text/plain")
        elif self.path.startswith("/weird"):
            self._reply(400, json.dumps({"error_code": "made_up_code", "message": "?"}))
        else:
            self._reply(400, "{not json", content_type="text/plain")

    do_POST = do_GET


@pytest.fixture(scope="module")
def misbehaving_url():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _MisbehavingHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    try:
        yield f"http://{host}:{port}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)


class TestDecodeParity:
    def test_gateway_decode_equals_local_decode(self):
        spec = random_instance(31, n_vocab=6)
        local = make_toy_session(spec)
        config = DecodeConfig(beam_width=4, init_tokens=1, max_clip_tokens=3)
        with serve_toy_gateway(ToyBackend(spec)) as url:
            remote = make_gateway_session(url, vocab=local.vocab)
            target_local = TargetSpec.image(local.align.embed_image(b"fixture:one"))
            target_remote = TargetSpec.image(remote.align.embed_image(b"fixture:one"))
            a = decode(target_local, local, config)
            b = decode(target_remote, remote, config)
        assert a.prompt == b.prompt
        assert a.score == b.score
        assert a.align_score == b.align_score
        assert a.lm_logprob_sum == b.lm_logprob_sum
        assert a.termination_reason == b.termination_reason
        assert a.trace.steps == b.trace.steps  # full float-level agreement

    def test_gateway_session_uses_served_chat_format(self, gateway_url):
        session = make_gateway_session(gateway_url)
        assert session.chat_format.name == "plain"
        assert session.vocab_cache is None  # no vocab given, no cache built


class TestConformanceSuite:
    def test_mock_gateway_passes_all_checks(self, gateway_url):
        passed = run_conformance(gateway_url, image=b"fixture:cat")
        assert set(passed) >= {
            "meta",
            "tokenize_detokenize_roundtrip",
            "next_logprobs_contract",
            "banned_token_filtering",
            "embed_text_contract",
            "count_tokens_contract",
            "embed_image_contract",
            "error_token_budget",
            "error_bad_image",
        }

    def test_transport_check_accepts_a_dead_gateway(self):
        check_transport_error("http://127.0.0.1:9", timeout=0.2)

    def test_transport_check_rejects_a_live_gateway(self, gateway_url):
        with pytest.raises(ConformanceFailure):
            check_transport_error(gateway_url, timeout=5.0)

    def test_a_broken_server_fails_conformance(self, misbehaving_url):
        with pytest.raises((ConformanceFailure, TransportError)):
            run_conformance(misbehaving_url + "/weird")


def test_lm_logprob_values_survive_json(toy):
    # The mock serializes logprobs with repr-level precision; spot-check a
    # value that is not exactly representable in decimal.
    row = dict(toy.next_logprobs([0], top_k=2))
    assert row[1] == math.log(0.9)
    assert json.loads(json.dumps(row[1])) == row[1]
