"""Contamination detection over per-token log-probabilities.

Two detectors ship. The min-k statistic averages the log-probabilities of
the k% least-probable tokens of a text under the candidate model; unusually
high values suggest the text was seen in training. The average-loss detector
compares mean negative log-likelihood of the benchmark against a
freshly-generated same-distribution reference set; a benchmark that is
anomalously easy relative to the fresh data is flagged at dataset level.
Neither k nor the thresholds have defensible universal defaults, so the
pipeline requires them as explicit config.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

from .data import EvalInstance, sample_few_shot
from .errors import EvalForgeError
from .seeding import derive_subseed

logger = logging.getLogger(__name__)

DEFAULT_K_PERCENT = 20.0


@dataclass
class TokenScoredText:
    """A text with one natural-log probability per token.

    Backends usually cannot score the first token of an unconditioned text;
    a ``None`` in the raw list marks such unscored positions and is skipped.
    """

    instance_id: str
    text: str
    token_logprobs: list[float] = field(default_factory=list)

    @classmethod
    def from_raw(
        cls, instance_id: str, text: str, raw_logprobs: list[float | None]
    ) -> "TokenScoredText":
        kept = [lp for lp in raw_logprobs if lp is not None]
        if not kept:
            raise EvalForgeError(
                f"instance {instance_id!r}: no scored tokens after skipping unscored ones"
            )
        return cls(instance_id=instance_id, text=text, token_logprobs=kept)


@dataclass
class ContaminationReport:
    method: str  # "min_k" or "avg_loss"
    per_instance: list[dict]
    aggregate: dict
    reference_stats: dict | None = None

    def to_dict(self) -> dict:
        doc = {
            "method": self.method,
            "per_instance": self.per_instance,
            "aggregate": self.aggregate,
        }
        if self.reference_stats is not None:
            doc["reference_stats"] = self.reference_stats
        return doc


def compute_min_k(token_logprobs: list[float], k_percent: float) -> float:
    """Mean of the E smallest logprobs, E = max(1, floor(k%/100 * T))."""
    if not token_logprobs:
        raise EvalForgeError("compute_min_k needs at least one logprob")
    if not 0 < k_percent <= 100:
        raise EvalForgeError(f"k_percent must be in (0, 100], got {k_percent}")
    count = max(1, math.floor(k_percent / 100 * len(token_logprobs)))
    lowest = sorted(token_logprobs)[:count]
    return sum(lowest) / count


def detect_min_k(
    scored: list[TokenScoredText], k_percent: float, threshold: float
) -> ContaminationReport:
    """Per-instance min-k statistics; flagged when statistic > threshold."""
    if not scored:
        raise EvalForgeError("detect_min_k needs at least one scored text")
    per_instance = []
    for item in scored:
        statistic = compute_min_k(item.token_logprobs, k_percent)
        per_instance.append(
            {
                "instance_id": item.instance_id,
                "statistic": statistic,
                "flagged": statistic > threshold,
            }
        )
    flagged_fraction = sum(p["flagged"] for p in per_instance) / len(per_instance)
    mean_statistic = sum(p["statistic"] for p in per_instance) / len(per_instance)
    return ContaminationReport(
        method="min_k",
        per_instance=per_instance,
        aggregate={
            "mean_statistic": mean_statistic,
            "flagged_fraction": flagged_fraction,
            "threshold": threshold,
            "k_percent": k_percent,
        },
    )


def instance_loss(item: TokenScoredText) -> float:
    """Per-instance average negative log-likelihood."""
    return -sum(item.token_logprobs) / len(item.token_logprobs)


def average_loss(scored: list[TokenScoredText]) -> float:
    """Macro average of per-instance losses."""
    if not scored:
        raise EvalForgeError("average_loss needs at least one scored text")
    return sum(instance_loss(item) for item in scored) / len(scored)


def compare_loss(
    test_set: list[TokenScoredText],
    reference_set: list[TokenScoredText],
    delta_threshold: float,
) -> ContaminationReport:
    """Dataset-level loss comparison: delta = loss(reference) - loss(test).

    A positive delta past the threshold means the benchmark is anomalously
    easy for the model relative to fresh same-distribution data.
    """
    if not test_set or not reference_set:
        raise EvalForgeError("compare_loss needs non-empty test and reference sets")
    mean_loss_test = average_loss(test_set)
    mean_loss_reference = average_loss(reference_set)
    delta = mean_loss_reference - mean_loss_test
    flagged = delta > delta_threshold
    per_instance = [
        {
            "instance_id": item.instance_id,
            "statistic": instance_loss(item),
            "flagged": flagged,
        }
        for item in test_set
    ]
    return ContaminationReport(
        method="avg_loss",
        per_instance=per_instance,
        aggregate={
            "mean_statistic": mean_loss_test,
            "flagged_fraction": float(flagged),
            "threshold": delta_threshold,
        },
        reference_stats={
            "mean_loss_test": mean_loss_test,
            "mean_loss_reference": mean_loss_reference,
            "delta": delta,
        },
    )


def contamination_text(instance: EvalInstance) -> str:
    """Surface string scored by the detectors: question plus gold answer."""
    answer = instance.gold_answer
    if answer:
        return f"{instance.question} {answer}"
    return instance.question


# -- synthetic reference-set generation ---------------------------------


def build_generation_prompt(
    template_text: str, exemplars: list[EvalInstance], ordinal: int, attempt: int
) -> str:
    lines = [json.dumps(e.to_record(), ensure_ascii=False, sort_keys=True) for e in exemplars]
    return template_text.format(
        exemplars="\n".join(lines), ordinal=ordinal, attempt=attempt
    )


def parse_generated_instance(raw: str, instance_id: str) -> EvalInstance:
    """Extract the first JSON object from generator output; raises on garbage."""
    start = raw.find("{")
    if start < 0:
        raise EvalForgeError("no JSON object in generator output")
    decoder = json.JSONDecoder()
    try:
        doc, _ = decoder.raw_decode(raw[start:])
    except json.JSONDecodeError as exc:
        raise EvalForgeError(f"generator output is not valid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("question"), str):
        raise EvalForgeError("generated item lacks a question")
    options = doc.get("options", [])
    if not isinstance(options, list) or not all(isinstance(o, str) for o in options):
        raise EvalForgeError("generated item has malformed options")
    gold_index = doc.get("gold_index")
    if gold_index is not None and (
        not isinstance(gold_index, int) or not 0 <= gold_index < len(options)
    ):
        raise EvalForgeError("generated item has an out-of-range gold_index")
    gold_text = doc.get("gold_text")
    if gold_index is not None and gold_text is not None:
        gold_text = None  # prefer the index form when both slip through
    return EvalInstance(
        instance_id=instance_id,
        question=doc["question"],
        options=list(options),
        gold_index=gold_index,
        gold_text=gold_text if isinstance(gold_text, str) else None,
        metadata={"generated": True},
    )


def generate_reference_set(
    seed_instances: list[EvalInstance],
    generate_fn,
    n: int,
    template_text: str,
    seed: int = 0,
    exemplar_count: int = 3,
    retries: int = 2,
    hard_fail: bool = False,
) -> list[EvalInstance]:
    """Produce ``n`` fresh instances in the seed set's distribution.

    ``generate_fn(prompt) -> str`` performs the model call. Each item gets
    its own prompt carrying the ordinal, and retries embed the attempt number
    so a retried call is a distinct request rather than a cache replay.
    Malformed generations are retried up to ``retries`` extra times, then
    skipped with a warning (or a hard failure when configured).
    """
    if not seed_instances:
        raise EvalForgeError("generate_reference_set needs seed instances")
    exemplar_count = min(exemplar_count, len(seed_instances))
    generated: list[EvalInstance] = []
    for ordinal in range(n):
        exemplars = sample_few_shot(
            seed_instances,
            exemplar_count,
            derive_subseed(seed, f"gen-{ordinal}"),
        )
        result: EvalInstance | None = None
        for attempt in range(retries + 1):
            prompt = build_generation_prompt(template_text, exemplars, ordinal, attempt)
            raw = generate_fn(prompt)
            try:
                result = parse_generated_instance(raw, f"generated-{ordinal}")
                break
            except EvalForgeError as exc:
                logger.warning(
                    "generated item %d attempt %d malformed: %s", ordinal, attempt, exc
                )
        if result is None:
            if hard_fail:
                raise EvalForgeError(
                    f"generated item {ordinal} malformed after {retries + 1} attempts"
                )
            continue
        generated.append(result)
    if len(generated) < n:
        logger.warning("generated only %d of %d requested instances", len(generated), n)
    return generated
