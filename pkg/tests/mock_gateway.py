"""In-process mock gateway: the wire protocol served over a toy backend.

Spun up on an ephemeral localhost port for client and conformance tests.
Errors surface exactly as a compliant server must emit them: HTTP 400 with
``{error_code, message}`` (plus ``index`` where the exception carries one).
"""

from __future__ import annotations

import base64
import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from vgd.backends.toy import ToyBackend
from vgd.errors import VgdError


def _handler_for(backend: ToyBackend):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output quiet
            pass

        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error(self, exc: Exception):
            if isinstance(exc, VgdError):
                payload = {"error_code": exc.error_code, "message": str(exc)}
                index = getattr(exc, "index", None)
                if index is not None:
                    payload["index"] = index
                self._send(400, payload)
            else:
                self._send(400, {"error_code": "error", "message": str(exc)})

        def do_GET(self):
            if self.path != "/v1/meta":
                self._send(404, {"error_code": "error", "message": "no such endpoint"})
                return
            self._send(
                200,
                {
                    "lm_name": "toy-bigram",
                    "align_name": backend.backend_id,
                    "vocab_size": backend.vocab_size,
                    "dim": backend.dim,
                    "logit_scale": backend.logit_scale,
                    "max_text_tokens": backend.max_text_tokens,
                    "banned_token_ids": sorted(backend.banned_token_ids),
                    "eos_token_id": backend.eos_token_id,
                    "chat_format": "plain",
                },
            )

        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._send(400, {"error_code": "error", "message": "invalid JSON body"})
                return
            try:
                self._send(200, self._dispatch(self.path, body))
            except (VgdError, ValueError, KeyError, TypeError) as exc:
                self._send_error(exc)

        @staticmethod
        def _dispatch(path: str, body: dict) -> dict:
            if path == "/v1/lm/next_logprobs":
                rows = backend.next_logprobs(
                    [int(t) for t in body["context_ids"]], top_k=int(body["top_k"])
                )
                return {"candidates": [{"id": t, "logprob": lp} for t, lp in rows]}
            if path == "/v1/lm/tokenize":
                return {"ids": backend.tokenize(str(body["text"]))}
            if path == "/v1/lm/detokenize":
                return {"text": backend.detokenize([int(t) for t in body["ids"]])}
            if path == "/v1/align/embed_text":
                embs = backend.embed_text([str(t) for t in body["texts"]])
                return {"embeddings": [e.values.tolist() for e in embs]}
            if path == "/v1/align/embed_image":
                image = base64.b64decode(body["image_b64"])
                return {"embedding": backend.embed_image(image).values.tolist()}
            if path == "/v1/align/count_tokens":
                return {"counts": backend.count_tokens([str(t) for t in body["texts"]])}
            raise ValueError(f"no such endpoint {path}")

    return Handler


@contextmanager
def serve_toy_gateway(backend: ToyBackend):
    """Serve a toy backend on an ephemeral port; yields the base URL."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _handler_for(backend))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
