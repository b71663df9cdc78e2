"""Prompt templates and rendering for the two scoring regimes.

MCP (multiple-choice prompt) renders labeled options into a single text and
the model is asked to emit a label. CP (cloze prompt) renders one shared
context per instance and ranks each option text as a continuation by its
log-likelihood. Templates are JSON documents; two built-ins per regime
(PromptA, PromptB) ship with the package.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .data import EvalInstance
from .errors import TemplateError

DEFAULT_OPTION_LABELS = list(string.ascii_uppercase[:8])

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")

# Placeholders each format string must use, by (regime, field). The query
# never carries {answer}: its answer slot stays empty for the model to fill.
_ALLOWED = {
    ("MCP", "exemplar_format"): {"question", "options", "answer"},
    ("MCP", "query_format"): {"question", "options"},
    ("CP", "exemplar_format"): {"question", "answer"},
    ("CP", "query_format"): {"question"},
}


@dataclass
class PromptTemplate:
    template_id: str
    regime: str  # "CP" or "MCP"
    preamble: str
    exemplar_format: str
    query_format: str
    option_labels: list[str] = field(default_factory=lambda: list(DEFAULT_OPTION_LABELS))

    def validate(self) -> None:
        if self.regime not in ("CP", "MCP"):
            raise TemplateError(f"template {self.template_id!r}: bad regime {self.regime!r}")
        for fname in ("exemplar_format", "query_format"):
            allowed = _ALLOWED[(self.regime, fname)]
            found = set(_PLACEHOLDER_RE.findall(getattr(self, fname)))
            if found != allowed:
                raise TemplateError(
                    f"template {self.template_id!r}: {fname} placeholders {sorted(found)} "
                    f"!= required {sorted(allowed)} for regime {self.regime}"
                )
        if not self.option_labels:
            raise TemplateError(f"template {self.template_id!r}: option_labels empty")


@dataclass
class RenderedPrompt:
    """Rendered form of one instance under a template.

    MCP carries a single ``text``; CP carries per-option (context,
    continuation) pairs whose context strings are byte-identical.
    """

    instance_id: str
    regime: str
    shots: int
    text: str | None = None
    option_pairs: list[tuple[str, str]] | None = None


def template_from_dict(doc: dict) -> PromptTemplate:
    try:
        tpl = PromptTemplate(
            template_id=doc["template_id"],
            regime=doc["regime"],
            preamble=doc["preamble"],
            exemplar_format=doc["exemplar_format"],
            query_format=doc["query_format"],
            option_labels=list(doc.get("option_labels", DEFAULT_OPTION_LABELS)),
        )
    except KeyError as exc:
        raise TemplateError(f"template document missing field: {exc}") from exc
    tpl.validate()
    return tpl


_BUILTIN_FILES = {
    ("MCP", "PromptA"): "mcp_prompt_a.json",
    ("MCP", "PromptB"): "mcp_prompt_b.json",
    ("CP", "PromptA"): "cp_prompt_a.json",
    ("CP", "PromptB"): "cp_prompt_b.json",
}


def builtin_template(regime: str, template_id: str) -> PromptTemplate:
    key = (regime, template_id)
    if key not in _BUILTIN_FILES:
        raise TemplateError(f"no built-in template {template_id!r} for regime {regime}")
    text = resources.files("evalforge.templates").joinpath(_BUILTIN_FILES[key]).read_text("utf-8")
    return template_from_dict(json.loads(text))


def resolve_template(regime: str, name_or_path: str) -> PromptTemplate:
    """Resolve a built-in template id ("PromptA") or a path to a template file."""
    if (regime, name_or_path) in _BUILTIN_FILES:
        return builtin_template(regime, name_or_path)
    path = Path(name_or_path)
    if path.is_file():
        tpl = template_from_dict(json.loads(path.read_text("utf-8")))
        if tpl.regime != regime:
            raise TemplateError(
                f"template {tpl.template_id!r} is for regime {tpl.regime}, not {regime}"
            )
        return tpl
    raise TemplateError(f"unknown template {name_or_path!r} for regime {regime}")


def format_options(options: list[str], labels: list[str]) -> str:
    return "\n".join(f"{label}. {text}" for label, text in zip(labels, options))


def render_prompt(
    instance: EvalInstance,
    shots: list[EvalInstance],
    template: PromptTemplate,
) -> RenderedPrompt:
    """Render one instance plus exemplars under a template.

    MCP exemplars end with the gold option label and the query ends at the
    answer slot. CP yields ``len(options)`` (context, continuation) pairs
    sharing a byte-identical context; the continuation is the option text.
    """
    if not instance.options:
        raise TemplateError(
            f"instance {instance.instance_id!r}: regime {template.regime} needs options"
        )
    if template.regime == "MCP":
        if len(instance.options) > len(template.option_labels):
            raise TemplateError(
                f"instance {instance.instance_id!r}: {len(instance.options)} options "
                f"but only {len(template.option_labels)} labels"
            )
        parts = [template.preamble]
        for shot in shots:
            parts.append(
                template.exemplar_format.format(
                    question=shot.question,
                    options=format_options(shot.options, template.option_labels),
                    answer=_mcp_gold_label(shot, template),
                )
            )
        parts.append(
            template.query_format.format(
                question=instance.question,
                options=format_options(instance.options, template.option_labels),
            )
        )
        return RenderedPrompt(
            instance_id=instance.instance_id,
            regime="MCP",
            shots=len(shots),
            text="".join(parts),
        )

    # CP: shared context, one continuation per option.
    parts = [template.preamble]
    for shot in shots:
        answer = shot.gold_answer
        if answer is None:
            raise TemplateError(
                f"exemplar {shot.instance_id!r} has no gold answer for CP rendering"
            )
        parts.append(template.exemplar_format.format(question=shot.question, answer=answer))
    parts.append(template.query_format.format(question=instance.question))
    context = "".join(parts)
    pairs = [(context, option) for option in instance.options]
    return RenderedPrompt(
        instance_id=instance.instance_id,
        regime="CP",
        shots=len(shots),
        option_pairs=pairs,
    )


def _mcp_gold_label(shot: EvalInstance, template: PromptTemplate) -> str:
    if shot.gold_index is None:
        raise TemplateError(
            f"exemplar {shot.instance_id!r} has no gold_index for MCP rendering"
        )
    return template.option_labels[shot.gold_index]


def extract_answer(
    raw_output: str,
    regime: str,
    option_labels: list[str],
) -> int | None:
    """Map model output to an option index (MCP regime).

    Picks the earliest occurrence of any label token, case-insensitively,
    tolerating surrounding punctuation and whitespace. Returns None when no
    label is found; callers grade that as incorrect but count it separately
    as unparsed.
    """
    if regime != "MCP":
        return None
    best: tuple[int, int] | None = None  # (position, option index)
    for idx, label in enumerate(option_labels):
        pattern = re.compile(
            rf"(?<![A-Za-z0-9])({re.escape(label)})(?![A-Za-z0-9])", re.IGNORECASE
        )
        m = pattern.search(raw_output)
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), idx)
    return best[1] if best else None
