"""Pairwise LLM-judge step over a response-pair file."""

from __future__ import annotations

import json
from pathlib import Path

from ..context import ExecutionContext
from ..errors import EvalForgeError
from ..gateway.core import InferenceGateway
from ..gateway.types import InferenceRequest
from ..jsonutil import canonical_dumps, pretty_dumps
from ..judging import judge_pairwise, load_judge_template
from ..pipeline import Step
from ..schema import Field


def load_pairs(path: str | Path) -> list[dict]:
    pairs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EvalForgeError(f"pairs line {line_no}: invalid JSON: {exc.msg}") from exc
            for field_name in ("pair_id", "question", "response_a", "response_b"):
                if field_name not in doc:
                    raise EvalForgeError(f"pairs line {line_no}: missing {field_name!r}")
            if doc["pair_id"] in seen:
                raise EvalForgeError(f"pairs line {line_no}: duplicate pair_id {doc['pair_id']!r}")
            seen.add(doc["pair_id"])
            pairs.append(doc)
    return pairs


class LlmJudgeStep(Step):
    kind = "llm_judge"
    params_schema = {
        "pairs": Field("str", required=True),
        "model": Field("str", required=True),
        "template": Field("str", default="judge_default"),
        "both_orders": Field("bool", default=True),
        "max_tokens": Field("int", default=64, min=1),
        "temperature": Field("float", default=0.0, min=0),
        "output_key": Field("str"),
    }

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        self.pairs = load_pairs(p["pairs"])
        if not self.pairs:
            raise EvalForgeError(f"pairs file {p['pairs']!r} is empty")
        self.template = load_judge_template(p["template"])
        if not gateway.has_model(p["model"]):
            raise EvalForgeError(f"no backend serves model {p['model']!r}")

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params

        # Batch all prompts up front so the gateway's worker pool and cache
        # see the whole workload at once, then hand each pair its responses.
        prompts: list[str] = []
        spans: list[tuple[int, int]] = []
        for pair in self.pairs:
            start = len(prompts)
            prompts.append(
                self.template.render(pair["question"], pair["response_a"], pair["response_b"])
            )
            if p["both_orders"]:
                prompts.append(
                    self.template.render(pair["question"], pair["response_b"], pair["response_a"])
                )
            spans.append((start, len(prompts)))
        responses = gateway.submit_batch(
            [
                InferenceRequest.generate(
                    prompt, p["model"],
                    max_tokens=p["max_tokens"], temperature=p["temperature"],
                )
                for prompt in prompts
            ]
        )
        errored = [r for r in responses if r.finish_reason == "error"]
        if errored:
            raise EvalForgeError(
                f"{len(errored)} judge requests failed; first error: {errored[0].error}"
            )

        self.verdicts = []
        for pair, (start, end) in zip(self.pairs, spans):
            answers = iter(responses[start:end])

            def judge_fn(_prompt: str) -> str:
                return next(answers).text

            self.verdicts.extend(
                judge_pairwise(
                    pair["pair_id"],
                    pair["question"],
                    pair["response_a"],
                    pair["response_b"],
                    judge_fn,
                    self.template,
                    both_orders=p["both_orders"],
                    response_a_id=pair.get("response_a_id"),
                    response_b_id=pair.get("response_b_id"),
                )
            )

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        key = self.output_key()
        ctx.write_artifact(
            f"results/{key}.jsonl",
            "".join(canonical_dumps(v.to_dict()) + "\n" for v in self.verdicts),
        )
        n = len(self.verdicts)
        unparsed = sum(v.unparsed_judge for v in self.verdicts)
        summary = {
            "n_verdicts": n,
            "n_pairs": len(self.pairs),
            "unparsed_judge_rate": unparsed / n if n else 0.0,
        }
        ctx.write_artifact(f"metrics/{key}.json", pretty_dumps(summary))
        ctx.set(
            key,
            {
                "verdicts": [v.to_dict() for v in self.verdicts],
                "pairs": self.pairs,
                "summary": summary,
            },
        )
