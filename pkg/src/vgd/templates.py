"""Prompt templates and chat-format assembly.

A template holds three task-specific texts: a system prompt, a user prompt,
and the assistant preamble after which generated tokens are appended. Role
markers are deliberately NOT part of the template: instruction-tuned model
families disagree on chat formats, so the markers are backend metadata
(a :class:`ChatFormat`) and the same template renders against any backend.

Placeholders use ``${name}`` syntax. ``${model.max_length}`` is an alias for
``${max_length}``: both resolve from the same binding.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Mapping

from .errors import TemplateBindingError, TemplateNotFoundError

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib


@dataclass(frozen=True)
class ChatFormat:
    """Role markers that wrap template texts into one LM context string.

    Rendering order is ``lead, system block, user block, assistant prefix,
    preamble``; the system block is skipped entirely when the system text is
    empty.
    """

    name: str = "plain"
    lead: str = ""
    system_prefix: str = ""
    system_suffix: str = "\n"
    user_prefix: str = ""
    user_suffix: str = "\n"
    assistant_prefix: str = ""

    def apply(self, system_text: str, user_text: str, model_preamble: str) -> str:
        parts = [self.lead]
        if system_text:
            parts += [self.system_prefix, system_text, self.system_suffix]
        parts += [self.user_prefix, user_text, self.user_suffix]
        parts += [self.assistant_prefix, model_preamble]
        return "".join(parts)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChatFormat":
        fields = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**fields)


#: Named chat formats. "plain" joins the three texts with newlines and is
#: what the toy backend uses; the rest mirror common instruction families
#: and are meant to be advertised by a gateway.
CHAT_FORMATS: dict[str, ChatFormat] = {
    "plain": ChatFormat(name="plain"),
    "llama2": ChatFormat(
        name="llama2",
        lead="[INST] ",
        system_prefix="<<SYS>>\n",
        system_suffix="\n<</SYS>>\n\n",
        user_prefix="",
        user_suffix=" [/INST]",
        assistant_prefix=" ",
    ),
    "llama3": ChatFormat(
        name="llama3",
        lead="<|begin_of_text|>",
        system_prefix="<|start_header_id|>system<|end_header_id|>\n\n",
        system_suffix="<|eot_id|>",
        user_prefix="<|start_header_id|>user<|end_header_id|>\n\n",
        user_suffix="<|eot_id|>",
        assistant_prefix="<|start_header_id|>assistant<|end_header_id|>\n\n",
    ),
    "mistral": ChatFormat(
        name="mistral",
        lead="[INST] ",
        system_prefix="",
        system_suffix="\n\n",
        user_prefix="",
        user_suffix=" [/INST]",
        assistant_prefix=" ",
    ),
    "chatml": ChatFormat(
        name="chatml",
        system_prefix="<|im_start|>system\n",
        system_suffix="<|im_end|>\n",
        user_prefix="<|im_start|>user\n",
        user_suffix="<|im_end|>\n",
        assistant_prefix="<|im_start|>assistant\n",
    ),
    "llava": ChatFormat(
        name="llava",
        system_prefix="",
        system_suffix="\n",
        user_prefix="USER: ",
        user_suffix="\n",
        assistant_prefix="ASSISTANT:",
    ),
}


def resolve_chat_format(value) -> ChatFormat:
    """Accept a ChatFormat, a registry name, or a marker dict."""
    if isinstance(value, ChatFormat):
        return value
    if value is None:
        return CHAT_FORMATS["plain"]
    if isinstance(value, str):
        try:
            return CHAT_FORMATS[value]
        except KeyError:
            raise TemplateNotFoundError(f"unknown chat format {value!r}") from None
    if isinstance(value, Mapping):
        return ChatFormat.from_dict(value)
    raise TemplateNotFoundError(f"cannot interpret chat format {value!r}")


_PLACEHOLDER = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_.]*)\}")
_ALIASES = {"model.max_length": "max_length"}


def _substitute(text: str, bindings: Mapping[str, object]) -> str:
    def repl(match: re.Match) -> str:
        name = _ALIASES.get(match.group(1), match.group(1))
        if name not in bindings:
            raise TemplateBindingError(f"unbound placeholder ${{{match.group(1)}}}")
        return str(bindings[name])

    rendered = _PLACEHOLDER.sub(repl, text)
    if "${" in rendered:
        raise TemplateBindingError(f"malformed placeholder left in {rendered!r}")
    return rendered


@dataclass(frozen=True)
class PromptTemplate:
    """Task texts with ``${...}`` placeholders."""

    template_id: str
    system_text: str
    user_text: str
    model_preamble: str

    def render(self, bindings: Mapping[str, object]) -> tuple[str, str, str]:
        """Bind all placeholders; raises if any is left unbound."""
        return (
            _substitute(self.system_text, bindings),
            _substitute(self.user_text, bindings),
            _substitute(self.model_preamble, bindings),
        )


_SYSTEM = (
    "You are a respectful and honest visual description generator for Stable Diffusion "
    "text prompt.\nAnswer in 1 sentence and do not mention anything other than the prompt. "
    "Do not mention 'description'."
)

_PREAMBLE = "Answer: Sure, here is a prompt for stable diffusion within ${model.max_length} tokens:"

BUILTIN_TEMPLATES: dict[str, PromptTemplate] = {
    "inversion": PromptTemplate(
        template_id="inversion",
        system_text=_SYSTEM,
        user_text=(
            "Please generate the diffusion prompt on the given condition containing the "
            "objects, people, background, and the style of the image:"
        ),
        model_preamble=_PREAMBLE,
    ),
    "style": PromptTemplate(
        template_id="style",
        system_text=_SYSTEM,
        user_text=(
            "Please generate the diffusion prompt of the image style based on the given "
            "condition containing the painting style, color, and shapes of the image:"
        ),
        model_preamble=_PREAMBLE,
    ),
    "distill": PromptTemplate(
        template_id="distill",
        system_text=_SYSTEM,
        user_text=(
            "Please generate the diffusion prompt within ${max_length} tokens so that you "
            "can generate same images with a given prompt: ${target_prompt}"
        ),
        model_preamble=_PREAMBLE,
    ),
    # Plain captioning prompt for multimodal backends; the image token is a
    # gateway concern and the toy path never renders this template.
    "captioner": PromptTemplate(
        template_id="captioner",
        system_text="",
        user_text="<image> Describe the scene in this image with one sentence.",
        model_preamble="",
    ),
}


def load_templates(path) -> dict[str, PromptTemplate]:
    """Load template overrides from a TOML or JSON file.

    The file holds a ``templates`` array of tables, each with template_id,
    system_text, user_text and model_preamble keys (missing text keys default
    to empty). The result merges over the built-ins.
    """
    p = Path(path)
    raw = p.read_bytes()
    if p.suffix.lower() == ".json":
        data = json.loads(raw.decode("utf-8"))
    else:
        data = tomllib.loads(raw.decode("utf-8"))
    entries = data.get("templates", [])
    if isinstance(entries, Mapping):
        entries = [{"template_id": k, **v} for k, v in entries.items()]
    registry = dict(BUILTIN_TEMPLATES)
    for entry in entries:
        if "template_id" not in entry:
            raise TemplateNotFoundError(f"template entry without template_id in {path}")
        tpl = PromptTemplate(
            template_id=entry["template_id"],
            system_text=entry.get("system_text", ""),
            user_text=entry.get("user_text", ""),
            model_preamble=entry.get("model_preamble", ""),
        )
        registry[tpl.template_id] = tpl
    return registry


def get_template(
    template_id: str, registry: Mapping[str, PromptTemplate] | None = None
) -> PromptTemplate:
    reg = registry if registry is not None else BUILTIN_TEMPLATES
    try:
        return reg[template_id]
    except KeyError:
        raise TemplateNotFoundError(f"no template registered under {template_id!r}") from None


def render_context(
    template_id: str,
    bindings: Mapping[str, object],
    chat_format: ChatFormat,
    lm,
    registry: Mapping[str, PromptTemplate] | None = None,
) -> tuple[int, ...]:
    """Render a template into the full LM context token ids.

    The ids end exactly where generated tokens will be appended, i.e. right
    after the model preamble.
    """
    tpl = get_template(template_id, registry)
    system_text, user_text, preamble = tpl.render(bindings)
    context_text = chat_format.apply(system_text, user_text, preamble)
    return tuple(lm.tokenize(context_text))
