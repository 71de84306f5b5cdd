"""Startup configuration: which checkpoints to serve, where, and how."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# Text-to-image models and the text encoder family each was trained with.
# Decoding against a mismatched alignment model still runs, but its scores
# no longer predict what the downstream generator will do — worth a warning.
MATCHED_TEXT_ENCODERS = {
    "stabilityai/stable-diffusion-2-1": "laion/CLIP-ViT-H-14-laion2B-s32B-b79K",
    "stabilityai/stable-diffusion-2": "laion/CLIP-ViT-H-14-laion2B-s32B-b79K",
    "runwayml/stable-diffusion-v1-5": "openai/clip-vit-large-patch14",
    "CompVis/stable-diffusion-v1-4": "openai/clip-vit-large-patch14",
}

_KNOWN_KEYS = {
    "lm_id",
    "align_id",
    "device",
    "host",
    "port",
    "chat_format",
    "diffusion_model",
}


class ConfigFileError(ValueError):
    """The gateway config file is missing, malformed, or incomplete."""


@dataclass(frozen=True)
class GatewayConfig:
    """Everything `serve` needs: model ids, device placement, bind address.

    ``lm_id`` and ``align_id`` are HF hub ids or local checkpoint paths.
    ``chat_format`` is the role-marker convention of the served chat model
    ("plain", "llama2", "llama3", "chatml"); the gateway owns this because
    it knows which model it loaded. ``diffusion_model`` optionally names the
    downstream text-to-image model so a mismatched alignment encoder can be
    flagged at startup.
    """

    lm_id: str
    align_id: str
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8137
    chat_format: str = "plain"
    diffusion_model: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "GatewayConfig":
        unknown = set(data) - _KNOWN_KEYS
        if unknown:
            raise ConfigFileError(f"unknown config keys: {sorted(unknown)}")
        for key in ("lm_id", "align_id"):
            if not data.get(key):
                raise ConfigFileError(f"config must set {key}")
        return cls(
            lm_id=str(data["lm_id"]),
            align_id=str(data["align_id"]),
            device=str(data.get("device", "cpu")),
            host=str(data.get("host", "127.0.0.1")),
            port=int(data.get("port", 8137)),
            chat_format=str(data.get("chat_format", "plain")),
            diffusion_model=(
                str(data["diffusion_model"]) if data.get("diffusion_model") else None
            ),
        )


def load_config(path) -> GatewayConfig:
    """Load a TOML (default) or JSON gateway config file."""
    p = Path(path)
    if not p.exists():
        raise ConfigFileError(f"config file not found: {p}")
    raw = p.read_bytes()
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigFileError(f"could not parse {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigFileError(f"config root must be a table/object, got {type(data).__name__}")
    return GatewayConfig.from_mapping(data)


def mismatch_warning(config: GatewayConfig) -> str | None:
    """Message when the configured alignment model is not the one matched to
    the configured text-to-image model, else None."""
    if config.diffusion_model is None:
        return None
    matched = MATCHED_TEXT_ENCODERS.get(config.diffusion_model)
    if matched is None:
        return (
            f"no known text-encoder pairing for {config.diffusion_model!r}; "
            f"cannot verify that {config.align_id!r} matches it"
        )
    if config.align_id != matched:
        return (
            f"alignment model {config.align_id!r} is not the text encoder "
            f"{matched!r} that {config.diffusion_model!r} was trained with; "
            "alignment scores will not predict that generator's behavior"
        )
    return None
