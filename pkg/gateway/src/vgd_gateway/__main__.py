"""`python -m vgd_gateway --config gateway.toml` — load models and serve."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigFileError, load_config
from .models import StartupError
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vgd-gateway",
        description="Serve the scorer wire protocol over configured model checkpoints.",
    )
    parser.add_argument("--config", required=True, help="TOML or JSON gateway config file")
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        config = load_config(args.config)
    except ConfigFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        serve(config)
    except StartupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
