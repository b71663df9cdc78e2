"""Grading of CP and MCP responses and metric aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EvalForgeError
from .gateway.types import InferenceResponse
from .prompts import extract_answer


@dataclass
class InstanceResult:
    instance_id: str
    predicted_index: int | None
    correct: bool
    unparsed: bool
    per_option_scores: list[float] | None = None
    raw_output: str | None = None

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "predicted_index": self.predicted_index,
            "correct": self.correct,
            "unparsed": self.unparsed,
            "per_option_scores": self.per_option_scores,
            "raw_output": self.raw_output,
        }


@dataclass
class MetricTable:
    metric_name: str
    overall: float
    by_group: dict[str, float] = field(default_factory=dict)
    n: int = 0
    unparsed_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "overall": self.overall,
            "by_group": dict(sorted(self.by_group.items())),
            "n": self.n,
            "unparsed_rate": self.unparsed_rate,
        }


def score_cloze(per_option_logprobs: list[list[float]], normalize: str = "sum") -> int:
    """Rank options by continuation log-likelihood; returns the argmax index.

    ``sum`` mode compares total logprob, ``mean`` divides by token count
    (length normalization). Ties break to the lowest option index.
    """
    if len(per_option_logprobs) < 2:
        raise EvalForgeError("cloze scoring needs at least 2 options")
    if normalize not in ("sum", "mean"):
        raise EvalForgeError(f"unknown normalization {normalize!r}")
    scores = []
    for i, logprobs in enumerate(per_option_logprobs):
        if not logprobs:
            raise EvalForgeError(f"option {i} has no continuation logprobs")
        total = sum(logprobs)
        scores.append(total / len(logprobs) if normalize == "mean" else total)
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def option_scores(per_option_logprobs: list[list[float]], normalize: str = "sum") -> list[float]:
    if normalize == "mean":
        return [sum(lp) / len(lp) for lp in per_option_logprobs]
    return [sum(lp) for lp in per_option_logprobs]


def score_mcp(
    response: InferenceResponse,
    gold_index: int,
    option_labels: list[str],
    instance_id: str = "",
) -> InstanceResult:
    """Grade a generated MCP answer by label extraction.

    Unparseable output grades as incorrect but is flagged so it can be
    counted separately instead of silently deflating accuracy.
    """
    predicted = extract_answer(response.text, "MCP", option_labels)
    return InstanceResult(
        instance_id=instance_id,
        predicted_index=predicted,
        correct=predicted is not None and predicted == gold_index,
        unparsed=predicted is None,
        raw_output=response.text,
    )


def aggregate(
    results: list[InstanceResult],
    groups: dict[str, str] | None = None,
    metric_name: str = "accuracy",
) -> MetricTable:
    """Mean-correct table with per-group breakdown and unparsed rate.

    ``groups`` maps instance_id to a group name (typically the instance
    metadata key ``group``); instances without a group count toward the
    overall rate only.
    """
    if not results:
        raise EvalForgeError("cannot aggregate an empty result list")
    overall = sum(r.correct for r in results) / len(results)
    unparsed_rate = sum(r.unparsed for r in results) / len(results)
    by_group: dict[str, float] = {}
    if groups:
        counts: dict[str, int] = {}
        hits: dict[str, int] = {}
        for r in results:
            group = groups.get(r.instance_id)
            if group is None:
                continue
            counts[group] = counts.get(group, 0) + 1
            hits[group] = hits.get(group, 0) + int(r.correct)
        by_group = {g: hits[g] / counts[g] for g in counts}
    return MetricTable(
        metric_name=metric_name,
        overall=overall,
        by_group=by_group,
        n=len(results),
        unparsed_rate=unparsed_rate,
    )
