"""Served model wrappers: a causal LM and a contrastive text-image aligner.

Model access goes through two small classes so the HTTP layer never touches
torch directly. Request-level failures raise :class:`RequestError` subtypes
carrying the wire error code; anything wrong at load time raises
:class:`StartupError` so the server can refuse to start with a diagnostic
instead of serving half-loaded models.
"""

from __future__ import annotations

import io
from typing import Sequence

import numpy as np
import torch


class StartupError(RuntimeError):
    """A checkpoint could not be loaded into a servable state."""


class RequestError(Exception):
    """Base for failures that map to structured 4xx responses."""

    code = "error"

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class TokenBudgetExceeded(RequestError):
    code = "token_budget"


class BadMedia(RequestError):
    code = "media"


class ContextTooLong(RequestError):
    code = "context_length"


def load_lm(model_id: str, device: str = "cpu") -> "ServedLm":
    from transformers import AutoModelForCausalLM, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForCausalLM.from_pretrained(model_id)
    except Exception as exc:
        raise StartupError(f"could not load language model {model_id!r}: {exc}") from exc
    try:
        model = model.to(device)
    except (RuntimeError, ValueError) as exc:
        raise StartupError(f"could not move {model_id!r} to device {device!r}: {exc}") from exc
    return ServedLm(model, tokenizer, device)


def load_align(model_id: str, device: str = "cpu") -> "ServedAlign":
    from transformers import AutoImageProcessor, AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        image_processor = AutoImageProcessor.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise StartupError(f"could not load alignment model {model_id!r}: {exc}") from exc
    for attr in ("text_model", "text_projection", "vision_model", "visual_projection", "logit_scale"):
        if not hasattr(model, attr):
            raise StartupError(
                f"{model_id!r} does not look like a contrastive text-image model "
                f"(missing {attr}); a CLIP-family checkpoint is required"
            )
    try:
        model = model.to(device)
    except (RuntimeError, ValueError) as exc:
        raise StartupError(f"could not move {model_id!r} to device {device!r}: {exc}") from exc
    return ServedAlign(model, tokenizer, image_processor, device)


class ServedLm:
    """Next-token scoring over a causal LM checkpoint."""

    def __init__(self, model, tokenizer, device: str = "cpu"):
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.device = device
        self.vocab_size = int(model.config.vocab_size)
        eos = tokenizer.eos_token_id
        self.eos_token_id = int(eos) if eos is not None else None
        self.banned_token_ids = frozenset(
            int(t) for t in tokenizer.all_special_ids if 0 <= int(t) < self.vocab_size
        )
        self.max_positions = int(
            getattr(model.config, "n_positions", None)
            or getattr(model.config, "max_position_embeddings")
        )

    def tokenize(self, text: str) -> list[int]:
        return [int(t) for t in self.tokenizer.encode(text, add_special_tokens=False)]

    def detokenize(self, ids: Sequence[int]) -> str:
        return self.tokenizer.decode([int(t) for t in ids])

    def next_logprobs(self, context_ids: Sequence[int], top_k: int) -> list[tuple[int, float]]:
        ids = [int(t) for t in context_ids]
        for t in ids:
            if not 0 <= t < self.vocab_size:
                raise RequestError(f"context token id {t} out of range")
        bos = self.tokenizer.bos_token_id
        if bos is not None:
            ids = [int(bos)] + ids
        if not ids:
            raise RequestError("empty context and the tokenizer has no BOS token")
        if len(ids) > self.max_positions:
            raise ContextTooLong(
                f"context of {len(ids)} tokens exceeds the model's {self.max_positions} positions"
            )
        with torch.no_grad():
            input_ids = torch.tensor([ids], dtype=torch.long, device=self.device)
            logits = self.model(input_ids=input_ids).logits[0, -1]
            logprobs = torch.log_softmax(logits.double(), dim=-1).cpu().numpy()
        k = max(1, min(int(top_k), self.vocab_size))
        # deterministic order: descending logprob, ties by ascending id
        order = np.lexsort((np.arange(self.vocab_size), -logprobs))[:k]
        return [(int(t), float(logprobs[t])) for t in order]


class ServedAlign:
    """Unit-normalized text/image embeddings over a CLIP-family checkpoint."""

    def __init__(self, model, tokenizer, image_processor, device: str = "cpu"):
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.image_processor = image_processor
        self.device = device
        self.dim = int(model.config.projection_dim)
        self.logit_scale = float(model.logit_scale.detach().exp())
        # reserve two positions for the BOS/EOS the forward pass adds
        self.max_text_tokens = int(model.config.text_config.max_position_embeddings) - 2

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        return [
            len(self.tokenizer.encode(str(t), add_special_tokens=False)) for t in texts
        ]

    def embed_text(self, texts: Sequence[str]) -> list[list[float]]:
        rows = []
        for i, text in enumerate(texts):
            ids = self.tokenizer.encode(str(text), add_special_tokens=False)
            if len(ids) > self.max_text_tokens:
                raise TokenBudgetExceeded(
                    f"text of {len(ids)} tokens exceeds the {self.max_text_tokens}-token budget",
                    index=i,
                )
            rows.append([int(t) for t in ids])
        bos, eos = self.tokenizer.bos_token_id, self.tokenizer.eos_token_id
        framed = [
            ([int(bos)] if bos is not None else []) + row + ([int(eos)] if eos is not None else [])
            for row in rows
        ]
        width = max(len(r) for r in framed)
        pad = int(eos if eos is not None else 0)
        input_ids = torch.full((len(framed), width), pad, dtype=torch.long, device=self.device)
        mask = torch.zeros((len(framed), width), dtype=torch.long, device=self.device)
        for i, row in enumerate(framed):
            input_ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            mask[i, : len(row)] = 1
        with torch.no_grad():
            pooled = self.model.text_model(input_ids=input_ids, attention_mask=mask).pooler_output
            embs = self.model.text_projection(pooled)
            embs = torch.nn.functional.normalize(embs, dim=-1)
        return [[float(x) for x in row] for row in embs.cpu().numpy()]

    def embed_image(self, image_bytes: bytes) -> list[float]:
        from PIL import Image, UnidentifiedImageError

        try:
            with Image.open(io.BytesIO(image_bytes)) as img:
                rgb = img.convert("RGB")
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise BadMedia(f"could not decode image: {exc}") from exc
        pixels = self.image_processor(images=rgb, return_tensors="pt").pixel_values.to(self.device)
        with torch.no_grad():
            pooled = self.model.vision_model(pixel_values=pixels).pooler_output
            emb = self.model.visual_projection(pooled)
            emb = torch.nn.functional.normalize(emb, dim=-1)
        return [float(x) for x in emb[0].cpu().numpy()]
