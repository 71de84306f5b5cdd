"""HTTP client for a model gateway speaking the JSON wire protocol.

The gateway owns the heavyweight models; this client implements the same
scorer interfaces as the toy backend on top of six endpoints::

    GET  /v1/meta
    POST /v1/lm/next_logprobs   {context_ids, top_k} -> {candidates: [{id, logprob}]}
    POST /v1/lm/tokenize        {text}  -> {ids}
    POST /v1/lm/detokenize      {ids}   -> {text}
    POST /v1/align/embed_text   {texts} -> {embeddings}
    POST /v1/align/embed_image  {image_b64} -> {embedding}
    POST /v1/align/count_tokens {texts} -> {counts}

Error responses are ``{error_code, message}`` with a 4xx status; the client
rehydrates them into the same typed exceptions local backends raise, so
callers cannot tell a remote scorer from a local one. Two meta fields are
extensions a server may omit: ``eos_token_id`` (needed to retire finished
hypotheses) and ``chat_format`` (role markers of the served chat model).

The wire protocol has no banned-token parameter, so banned-id filtering is
client-side: the client over-requests by the banned-set size and grows the
request in the rare case that was not enough.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Sequence

import requests

from ..core import EmbeddingVector
from ..errors import ERROR_CODE_MAP, TransportError, VgdError
from ..templates import ChatFormat, resolve_chat_format
from .base import AlignScorer, LmScorer

DEFAULT_TIMEOUT = 60.0


@dataclass(frozen=True)
class GatewayMeta:
    """Decoded /v1/meta payload."""

    lm_name: str
    align_name: str
    vocab_size: int
    dim: int
    logit_scale: float
    max_text_tokens: int
    banned_token_ids: frozenset[int]
    eos_token_id: int | None = None
    chat_format: ChatFormat | None = None

    @classmethod
    def from_payload(cls, data: dict) -> "GatewayMeta":
        try:
            meta = cls(
                lm_name=str(data["lm_name"]),
                align_name=str(data["align_name"]),
                vocab_size=int(data["vocab_size"]),
                dim=int(data["dim"]),
                logit_scale=float(data["logit_scale"]),
                max_text_tokens=int(data["max_text_tokens"]),
                banned_token_ids=frozenset(int(t) for t in data["banned_token_ids"]),
                eos_token_id=(
                    int(data["eos_token_id"]) if data.get("eos_token_id") is not None else None
                ),
                chat_format=(
                    resolve_chat_format(data["chat_format"])
                    if data.get("chat_format") is not None
                    else None
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed /v1/meta payload: {exc}") from exc
        return meta


class GatewayClient:
    """Thin transport wrapper: JSON in, JSON out, typed errors."""

    def __init__(self, base_url: str, timeout: float = DEFAULT_TIMEOUT, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._http = session if session is not None else requests.Session()
        self._meta: GatewayMeta | None = None

    def meta(self, refresh: bool = False) -> GatewayMeta:
        if self._meta is None or refresh:
            self._meta = GatewayMeta.from_payload(self._request("GET", "/v1/meta"))
        return self._meta

    def post(self, path: str, payload: dict) -> dict:
        return self._request("POST", path, payload)

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = self.base_url + path
        try:
            resp = self._http.request(method, url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"{method} {url} failed: {exc}") from exc
        if 400 <= resp.status_code < 500:
            raise self._typed_error(resp)
        if resp.status_code >= 500:
            raise TransportError(f"{method} {url} returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise TransportError(f"{method} {url} returned non-JSON body") from exc

    @staticmethod
    def _typed_error(resp) -> VgdError:
        try:
            body = resp.json()
            code = body["error_code"]
            message = body.get("message", "")
        except (ValueError, KeyError, TypeError):
            return TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        exc_cls = ERROR_CODE_MAP.get(code)
        if exc_cls is None:
            return TransportError(f"HTTP {resp.status_code} with unknown error_code {code!r}")
        exc = exc_cls(message)
        index = body.get("index")
        if index is not None and hasattr(exc, "index"):
            exc.index = int(index)
        return exc


class GatewayLm(LmScorer):
    """LM scorer over a gateway; caches tokenize/detokenize round trips."""

    def __init__(self, client: GatewayClient):
        self._client = client
        self._detok_cache: dict[tuple[int, ...], str] = {}
        self._tok_cache: dict[str, list[int]] = {}

    @property
    def meta(self) -> GatewayMeta:
        return self._client.meta()

    @property
    def vocab_size(self) -> int:
        return self.meta.vocab_size

    @property
    def eos_token_id(self) -> int | None:
        return self.meta.eos_token_id

    @property
    def banned_token_ids(self) -> frozenset[int]:
        return self.meta.banned_token_ids

    def next_logprobs(
        self,
        context_ids: Sequence[int],
        top_k: int,
        banned_token_ids: frozenset[int] = frozenset(),
    ) -> list[tuple[int, float]]:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        context = [int(t) for t in context_ids]
        # The wire has no banned-token field, so over-request and filter here.
        ask = min(top_k + len(banned_token_ids), self.vocab_size)
        while True:
            data = self._client.post(
                "/v1/lm/next_logprobs", {"context_ids": context, "top_k": ask}
            )
            pairs = [
                (int(c["id"]), float(c["logprob"]))
                for c in data["candidates"]
                if int(c["id"]) not in banned_token_ids
            ]
            if len(pairs) >= top_k or len(data["candidates"]) < ask or ask >= self.vocab_size:
                return pairs[:top_k]
            ask = min(ask * 2, self.vocab_size)

    def tokenize(self, text: str) -> list[int]:
        cached = self._tok_cache.get(text)
        if cached is None:
            cached = [int(t) for t in self._client.post("/v1/lm/tokenize", {"text": text})["ids"]]
            self._tok_cache[text] = cached
        return list(cached)

    def detokenize(self, token_ids: Sequence[int]) -> str:
        key = tuple(int(t) for t in token_ids)
        cached = self._detok_cache.get(key)
        if cached is None:
            cached = str(self._client.post("/v1/lm/detokenize", {"ids": list(key)})["text"])
            self._detok_cache[key] = cached
        return cached


class GatewayAlign(AlignScorer):
    """Alignment scorer over a gateway."""

    def __init__(self, client: GatewayClient):
        self._client = client

    @property
    def meta(self) -> GatewayMeta:
        return self._client.meta()

    @property
    def backend_id(self) -> str:
        return f"gateway:{self.meta.align_name}"

    @property
    def dim(self) -> int:
        return self.meta.dim

    @property
    def logit_scale(self) -> float:
        return self.meta.logit_scale

    @property
    def max_text_tokens(self) -> int:
        return self.meta.max_text_tokens

    def embed_text(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        data = self._client.post("/v1/align/embed_text", {"texts": list(texts)})
        return [EmbeddingVector(vec) for vec in data["embeddings"]]

    def embed_image(self, image: bytes) -> EmbeddingVector:
        payload = {"image_b64": base64.b64encode(bytes(image)).decode("ascii")}
        data = self._client.post("/v1/align/embed_image", payload)
        return EmbeddingVector(data["embedding"])

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        data = self._client.post("/v1/align/count_tokens", {"texts": list(texts)})
        return [int(c) for c in data["counts"]]
