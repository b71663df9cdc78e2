"""LLM-judge pairwise comparison with position-swap identity tracking.

A judge prompt presents two responses in a fixed order and the judge emits a
winner marker. Because judges exhibit position bias, each pair can be issued
in both presentation orders; verdict winners are always mapped back to the
underlying response identity (``A`` means response_a_id won, no matter where
it was shown), so downstream consistency checks compare identities, not
positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from .errors import EvalForgeError, TemplateError


@dataclass
class JudgeTemplate:
    template_id: str
    prompt: str  # placeholders: {question}, {response_a}, {response_b}
    marker_first: str = "[[A]]"
    marker_second: str = "[[B]]"
    marker_tie: str = "[[C]]"

    @classmethod
    def from_dict(cls, doc: dict) -> "JudgeTemplate":
        try:
            markers = doc.get("winner_markers", {})
            return cls(
                template_id=doc["template_id"],
                prompt=doc["prompt"],
                marker_first=markers.get("first", "[[A]]"),
                marker_second=markers.get("second", "[[B]]"),
                marker_tie=markers.get("tie", "[[C]]"),
            )
        except KeyError as exc:
            raise TemplateError(f"judge template missing field: {exc}") from exc

    def render(self, question: str, first: str, second: str) -> str:
        return self.prompt.format(question=question, response_a=first, response_b=second)


def load_judge_template(name_or_path: str = "judge_default") -> JudgeTemplate:
    if name_or_path == "judge_default":
        text = resources.files("evalforge.templates").joinpath("judge_default.json").read_text("utf-8")
        return JudgeTemplate.from_dict(json.loads(text))
    path = Path(name_or_path)
    if path.is_file():
        return JudgeTemplate.from_dict(json.loads(path.read_text("utf-8")))
    raise TemplateError(f"unknown judge template {name_or_path!r}")


@dataclass
class Verdict:
    """One judge judgment over a response pair.

    ``winner`` is identity-based: "A" refers to response_a_id and "B" to
    response_b_id in both presentation orders.
    """

    pair_id: str
    response_a_id: str
    response_b_id: str
    winner: str  # "A", "B", or "tie"
    order: str  # "original" or "swapped"
    judge_raw: str = ""
    unparsed_judge: bool = False
    score_a: float | None = None
    score_b: float | None = None

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "response_a_id": self.response_a_id,
            "response_b_id": self.response_b_id,
            "winner": self.winner,
            "order": self.order,
            "judge_raw": self.judge_raw,
            "unparsed_judge": self.unparsed_judge,
            "score_a": self.score_a,
            "score_b": self.score_b,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Verdict":
        return cls(
            pair_id=doc["pair_id"],
            response_a_id=doc["response_a_id"],
            response_b_id=doc["response_b_id"],
            winner=doc["winner"],
            order=doc["order"],
            judge_raw=doc.get("judge_raw", ""),
            unparsed_judge=doc.get("unparsed_judge", False),
            score_a=doc.get("score_a"),
            score_b=doc.get("score_b"),
        )


def parse_positional_winner(raw: str, template: JudgeTemplate) -> str | None:
    """Earliest marker occurrence wins: "first", "second", or "tie"."""
    hits = []
    for positional, marker in (
        ("first", template.marker_first),
        ("second", template.marker_second),
        ("tie", template.marker_tie),
    ):
        pos = raw.find(marker)
        if pos >= 0:
            hits.append((pos, positional))
    if not hits:
        return None
    return min(hits)[1]


def _to_identity(positional: str, order: str) -> str:
    if positional == "tie":
        return "tie"
    if order == "original":
        return "A" if positional == "first" else "B"
    return "B" if positional == "first" else "A"


def judge_pairwise(
    pair_id: str,
    question: str,
    response_a: str,
    response_b: str,
    judge_fn: Callable[[str], str],
    template: JudgeTemplate,
    both_orders: bool = True,
    response_a_id: str | None = None,
    response_b_id: str | None = None,
) -> list[Verdict]:
    """Judge one pair, optionally in both presentation orders.

    ``judge_fn(prompt) -> str`` performs the model call. Unparseable judge
    output yields winner=tie with ``unparsed_judge`` set rather than an
    error, so one flaky judgment cannot abort a batch.
    """
    response_a_id = response_a_id or f"{pair_id}:a"
    response_b_id = response_b_id or f"{pair_id}:b"
    orders = [("original", response_a, response_b)]
    if both_orders:
        orders.append(("swapped", response_b, response_a))
    verdicts = []
    for order, first, second in orders:
        raw = judge_fn(template.render(question, first, second))
        positional = parse_positional_winner(raw, template)
        verdicts.append(
            Verdict(
                pair_id=pair_id,
                response_a_id=response_a_id,
                response_b_id=response_b_id,
                winner="tie" if positional is None else _to_identity(positional, order),
                order=order,
                judge_raw=raw,
                unparsed_judge=positional is None,
            )
        )
    return verdicts


def evaluator_labels(verdicts: list[Verdict]) -> dict[str, str]:
    """Collapse verdicts to one identity label per pair.

    When both orders were judged, agreement keeps the winner and
    disagreement degrades to a tie; a single-order pair keeps its winner.
    """
    by_pair: dict[str, list[Verdict]] = {}
    for v in verdicts:
        by_pair.setdefault(v.pair_id, []).append(v)
    labels: dict[str, str] = {}
    for pair_id, vs in by_pair.items():
        winners = {v.winner for v in vs}
        if len(winners) == 1:
            labels[pair_id] = vs[0].winner
        else:
            labels[pair_id] = "tie"
    return labels


def order_pairs(verdicts: list[Verdict]) -> list[tuple[Verdict, Verdict]]:
    """Group both-order verdicts into (original, swapped) pairs by pair_id."""
    originals: dict[str, Verdict] = {}
    swapped: dict[str, Verdict] = {}
    for v in verdicts:
        target = originals if v.order == "original" else swapped
        if v.pair_id in target:
            raise EvalForgeError(f"duplicate {v.order} verdict for pair {v.pair_id!r}")
        target[v.pair_id] = v
    return [
        (originals[pid], swapped[pid]) for pid in originals if pid in swapped
    ]
