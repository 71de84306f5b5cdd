"""Command-line front end.

One decode per invocation. Settings resolve with CLI flag > config file >
environment > built-in default; ``--dry-run`` prints the resolved settings
without touching any backend. In non-JSON mode the prompt (and nothing else)
goes to stdout; diagnostics go to stderr. Exit codes: 0 success, 1 runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .backends import make_gateway_session, make_toy_session
from .backends.cache import VocabCache, build_vocab_cache
from .core import DecodeConfig
from .errors import VgdError
from .tasks import align_report, distill, fuse, invert, style
from .templates import load_templates
from .trace import DecodeTrace, replay_trace

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

ENV_GATEWAY_URL = "VGD_GATEWAY_URL"

#: name -> built-in default; None means "no default, optional".
_SETTING_DEFAULTS = {
    "backend": None,
    "beam": DecodeConfig.beam_width,
    "alpha": DecodeConfig.alpha,
    "init_tokens": DecodeConfig.init_tokens,
    "tokens": DecodeConfig.max_clip_tokens,
    "mode": DecodeConfig.mode,
    "template_file": None,
    "seed": DecodeConfig.seed,
    "json": False,
    "trace": None,
    "dry_run": False,
    "cache": None,
    "vocab_file": None,
}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common settings")
    g.add_argument(
        "--backend",
        help="scorer backend: 'toy:CONFIG.json' or 'gateway:URL' "
        f"(default from config file or ${ENV_GATEWAY_URL})",
    )
    g.add_argument("--beam", type=int, help="beam width K")
    g.add_argument("--alpha", type=float, help="LM weight in the combined score")
    g.add_argument("--init-tokens", type=int, dest="init_tokens", help="init prefix length M")
    g.add_argument("--tokens", type=int, help="token budget for the decoded prompt")
    g.add_argument("--mode", choices=["full", "llm-only", "clip-only"], help="scoring mode")
    g.add_argument("--template-file", dest="template_file", help="TOML/JSON template overrides")
    g.add_argument("--seed", type=int, help="seed recorded in the trace")
    g.add_argument("--json", action="store_true", default=None, help="machine-readable output")
    g.add_argument("--trace", help="write the decode trace (JSON lines) here")
    g.add_argument("--config", help="TOML settings file")
    g.add_argument(
        "--dry-run", action="store_true", default=None, dest="dry_run",
        help="print resolved settings and exit",
    )
    g.add_argument("--cache", help="vocabulary cache file to load (needs --vocab-file for gateways)")
    g.add_argument("--vocab-file", dest="vocab_file", help="newline-separated vocabulary list")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="vgd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invert", parents=[common], help="decode a prompt describing one image")
    p.add_argument("--image", required=True, help="image file (toy backends: fixture:NAME)")

    p = sub.add_parser("style", parents=[common], help="decode the shared style of several images")
    p.add_argument("--images", nargs="+", required=True, help="two or more image files")

    p = sub.add_parser("distill", parents=[common], help="compress a prompt to a token budget")
    p.add_argument("--prompt", required=True, help="the long source prompt")
    p.add_argument("--max-tokens", type=int, required=True, dest="max_tokens")

    p = sub.add_parser("fuse", parents=[common], help="concatenate prompts for multi-concept use")
    p.add_argument("--prompts", nargs="+", required=True)

    p = sub.add_parser("score", parents=[common], help="report prompt-image alignment")
    p.add_argument("--prompt", required=True)
    p.add_argument("--image", required=True)

    p = sub.add_parser("cache", parents=[common], help="vocabulary cache maintenance")
    cache_sub = p.add_subparsers(dest="cache_command", required=True)
    b = cache_sub.add_parser("build", parents=[common])
    b.add_argument("--out", required=True, help="output cache file")
    i = cache_sub.add_parser("inspect", parents=[common])
    i.add_argument("file", help="cache file to inspect")

    p = sub.add_parser("trace", parents=[common], help="decode trace utilities")
    trace_sub = p.add_subparsers(dest="trace_command", required=True)
    r = trace_sub.add_parser("replay", parents=[common])
    r.add_argument("file", help="trace file to re-verify")

    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge CLI flags, the TOML config file, the environment and defaults."""
    file_settings = {}
    if args.config:
        with open(args.config, "rb") as fh:
            file_settings = tomllib.load(fh)
    resolved = {}
    for key, default in _SETTING_DEFAULTS.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in file_settings:
            resolved[key] = file_settings[key]
        else:
            resolved[key] = default
    if resolved["backend"] is None and os.environ.get(ENV_GATEWAY_URL):
        resolved["backend"] = "gateway:" + os.environ[ENV_GATEWAY_URL]
    if resolved["mode"]:
        resolved["mode"] = str(resolved["mode"]).replace("-", "_")
    return resolved


def _decode_config(settings: dict, template_id: str = "inversion") -> DecodeConfig:
    return DecodeConfig(
        beam_width=int(settings["beam"]),
        init_tokens=int(settings["init_tokens"]),
        alpha=float(settings["alpha"]),
        max_clip_tokens=int(settings["tokens"]),
        mode=settings["mode"],
        template_id=template_id,
        seed=int(settings["seed"]),
    )


def _load_vocab_file(path) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return tuple(line.strip() for line in lines if line.strip())


def _make_session(settings: dict):
    backend = settings["backend"]
    if not backend or ":" not in backend:
        raise UsageError(
            "no backend selected: pass --backend toy:CONFIG.json / gateway:URL, "
            f"set it in the config file, or export {ENV_GATEWAY_URL}"
        )
    kind, location = backend.split(":", 1)
    if kind == "toy":
        session = make_toy_session(location, cache_path=settings["cache"])
    elif kind == "gateway":
        vocab = _load_vocab_file(settings["vocab_file"]) if settings["vocab_file"] else None
        session = make_gateway_session(location, vocab=vocab, cache_path=settings["cache"])
    else:
        raise UsageError(f"unknown backend kind {kind!r} (expected 'toy' or 'gateway')")
    if settings["template_file"]:
        session = dataclasses.replace(session, templates=load_templates(settings["template_file"]))
    return session


class UsageError(Exception):
    """Bad invocation detected after argparse (exit code 2)."""


def _read_image(path: str) -> bytes:
    # Toy fixture references may be given inline instead of as files.
    if path.startswith("fixture:"):
        return path.encode("utf-8")
    return Path(path).read_bytes()


def _emit_decode(result, settings: dict) -> None:
    if settings["json"]:
        payload = {
            "prompt": result.prompt,
            "score": result.score,
            "align": result.align_score,
            "lm_logprob": result.lm_logprob_sum,
            "steps": result.steps,
            "termination_reason": result.termination_reason,
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        print(result.prompt)


def _run(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    if settings["dry_run"]:
        print(json.dumps({"command": args.command, "settings": settings}, sort_keys=True))
        return 0

    if args.command == "fuse":
        if len(args.prompts) < 2:
            raise UsageError(f"fusion needs at least 2 prompts, got {len(args.prompts)}")
        fused = fuse(args.prompts)
        print(json.dumps({"prompt": fused}, sort_keys=True) if settings["json"] else fused)
        return 0

    if args.command == "trace":
        trace = DecodeTrace.load(args.file)
        verified = replay_trace(trace)
        if settings["json"]:
            print(json.dumps({"file": args.file, "verified_scores": verified}, sort_keys=True))
        else:
            print(f"{args.file}: replayed {verified} scores exactly")
        return 0

    if args.command == "cache" and args.cache_command == "inspect":
        header = VocabCache.read_header(args.file)
        if settings["json"]:
            print(json.dumps(header, sort_keys=True))
        else:
            for key in ("version", "vocab_size", "dim", "backend_id", "bytes"):
                print(f"{key}: {header[key]}")
        return 0

    session = _make_session(settings)

    if args.command == "cache":
        vocab = session.vocab
        if settings["vocab_file"]:
            vocab = _load_vocab_file(settings["vocab_file"])
        if not vocab:
            raise UsageError("cache build needs a vocabulary: use a toy backend or --vocab-file")
        cache = build_vocab_cache(session.align, vocab, path=args.out)
        summary = {
            "path": args.out,
            "vocab_size": cache.vocab_size,
            "dim": cache.dim,
            "backend_id": cache.backend_id,
        }
        if settings["json"]:
            print(json.dumps(summary, sort_keys=True))
        else:
            print(f"wrote {args.out}: {cache.vocab_size} tokens, dim {cache.dim}")
        return 0

    if args.command == "score":
        report = align_report(args.prompt, _read_image(args.image), session)
        if settings["json"]:
            print(json.dumps(report, sort_keys=True))
        else:
            for key in ("cosine", "scaled", "token_count"):
                print(f"{key}: {report[key]}")
        return 0

    trace_path = settings["trace"]
    if args.command == "invert":
        config = _decode_config(settings, template_id="inversion")
        result = invert(_read_image(args.image), session, config, trace_path=trace_path)
    elif args.command == "style":
        config = _decode_config(settings, template_id="style")
        result = style(
            [_read_image(p) for p in args.images], session, config, trace_path=trace_path
        )
    elif args.command == "distill":
        config = _decode_config(settings, template_id="distill")
        result = distill(args.prompt, args.max_tokens, session, config, trace_path=trace_path)
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown command {args.command!r}")
    _emit_decode(result, settings)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except VgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
