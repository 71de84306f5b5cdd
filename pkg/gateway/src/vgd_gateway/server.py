"""The HTTP layer: six JSON endpoints over the served models.

Endpoints and shapes::

    GET  /v1/meta
    POST /v1/lm/next_logprobs   {context_ids, top_k} -> {candidates: [{id, logprob}]}
    POST /v1/lm/tokenize        {text}  -> {ids}
    POST /v1/lm/detokenize      {ids}   -> {text}
    POST /v1/align/embed_text   {texts} -> {embeddings}
    POST /v1/align/embed_image  {image_b64} -> {embedding}
    POST /v1/align/count_tokens {texts} -> {counts}

Request failures return HTTP 400 with ``{error_code, message}`` (plus
``index`` when one item of a batch is at fault); unexpected failures return
HTTP 500. Requests are handled concurrently; a lock serializes model
forward passes, and no state crosses requests.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .config import GatewayConfig, mismatch_warning
from .models import RequestError, ServedAlign, ServedLm, load_align, load_lm

log = logging.getLogger("vgd_gateway")


def build_meta(config: GatewayConfig, lm: ServedLm, align: ServedAlign) -> dict:
    """The /v1/meta payload; everything read from the loaded checkpoints."""
    return {
        "lm_name": config.lm_id,
        "align_name": config.align_id,
        "vocab_size": lm.vocab_size,
        "dim": align.dim,
        "logit_scale": align.logit_scale,
        "max_text_tokens": align.max_text_tokens,
        "banned_token_ids": sorted(lm.banned_token_ids),
        "eos_token_id": lm.eos_token_id,
        "chat_format": config.chat_format,
    }


def _handler_for(meta: dict, lm: ServedLm, align: ServedAlign):
    forward_lock = threading.Lock()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path != "/v1/meta":
                self._send(404, {"error_code": "error", "message": f"no such endpoint {self.path}"})
                return
            self._send(200, meta)

        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._send(400, {"error_code": "error", "message": "invalid JSON body"})
                return
            try:
                self._send(200, self._dispatch(self.path, body))
            except RequestError as exc:
                payload = {"error_code": exc.code, "message": str(exc)}
                if exc.index is not None:
                    payload["index"] = exc.index
                self._send(400, payload)
            except (ValueError, KeyError, TypeError) as exc:
                self._send(400, {"error_code": "error", "message": f"bad request: {exc}"})
            except Exception as exc:  # pragma: no cover - unexpected faults
                log.exception("internal error handling %s", self.path)
                self._send(500, {"error_code": "error", "message": f"internal error: {exc}"})

        @staticmethod
        def _dispatch(path: str, body: dict) -> dict:
            if path == "/v1/lm/next_logprobs":
                context = [int(t) for t in body["context_ids"]]
                with forward_lock:
                    rows = lm.next_logprobs(context, top_k=int(body["top_k"]))
                return {"candidates": [{"id": t, "logprob": lp} for t, lp in rows]}
            if path == "/v1/lm/tokenize":
                return {"ids": lm.tokenize(str(body["text"]))}
            if path == "/v1/lm/detokenize":
                return {"text": lm.detokenize([int(t) for t in body["ids"]])}
            if path == "/v1/align/embed_text":
                texts = [str(t) for t in body["texts"]]
                with forward_lock:
                    return {"embeddings": align.embed_text(texts)}
            if path == "/v1/align/embed_image":
                try:
                    image = base64.b64decode(body["image_b64"], validate=True)
                except (binascii.Error, ValueError) as exc:
                    raise RequestError(f"image_b64 is not valid base64: {exc}") from exc
                with forward_lock:
                    return {"embedding": align.embed_image(image)}
            if path == "/v1/align/count_tokens":
                return {"counts": align.count_tokens([str(t) for t in body["texts"]])}
            raise RequestError(f"no such endpoint {path}")

    return Handler


def make_server(
    config: GatewayConfig, lm: ServedLm, align: ServedAlign, port: int | None = None
) -> ThreadingHTTPServer:
    """Bind a server for already-loaded models (port 0 = ephemeral)."""
    handler = _handler_for(build_meta(config, lm, align), lm, align)
    bind_port = config.port if port is None else port
    return ThreadingHTTPServer((config.host, bind_port), handler)


def serve(config: GatewayConfig) -> None:
    """Load the configured checkpoints and serve until interrupted.

    Load failures surface as StartupError before the socket is bound — the
    gateway refuses to start rather than serving half-loaded models.
    """
    warning = mismatch_warning(config)
    if warning is not None:
        log.warning("%s", warning)
    log.info("loading language model %s on %s", config.lm_id, config.device)
    lm = load_lm(config.lm_id, config.device)
    log.info("loading alignment model %s on %s", config.align_id, config.device)
    align = load_align(config.align_id, config.device)
    server = make_server(config, lm, align)
    host, port = server.server_address[:2]
    log.info("serving on http://%s:%s (vocab %d, dim %d)", host, port, lm.vocab_size, align.dim)
    try:
        server.serve_forever()
    finally:
        server.server_close()
