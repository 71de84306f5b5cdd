"""Reference gateway: the vgd scorer wire protocol over real checkpoints."""

from .config import (
    ConfigFileError,
    GatewayConfig,
    MATCHED_TEXT_ENCODERS,
    load_config,
    mismatch_warning,
)
from .models import (
    BadMedia,
    ContextTooLong,
    RequestError,
    ServedAlign,
    ServedLm,
    StartupError,
    TokenBudgetExceeded,
    load_align,
    load_lm,
)
from .server import build_meta, make_server, serve

__all__ = [
    "BadMedia",
    "ConfigFileError",
    "ContextTooLong",
    "GatewayConfig",
    "MATCHED_TEXT_ENCODERS",
    "RequestError",
    "ServedAlign",
    "ServedLm",
    "StartupError",
    "TokenBudgetExceeded",
    "build_meta",
    "load_align",
    "load_config",
    "load_lm",
    "make_server",
    "mismatch_warning",
    "serve",
]
