"""Meta-evaluation step: agreement with humans and judge bias rates."""

from __future__ import annotations

from ..context import ExecutionContext
from ..errors import EvalForgeError
from ..gateway.core import InferenceGateway
from ..judging import Verdict, evaluator_labels, order_pairs
from ..jsonutil import pretty_dumps
from ..metaeval import (
    agreement_accuracy,
    cohen_kappa,
    length_preference_rate,
    load_preferences,
    position_bias_rate,
)
from ..pipeline import Step
from ..schema import Field


class MetaEvalStep(Step):
    kind = "meta_eval"
    params_schema = {
        "verdicts_key": Field("str", required=True),
        "humans": Field("str"),
        "exclude_ties": Field("bool", default=False),
        "output_key": Field("str"),
    }

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        judge_output = ctx.get(p["verdicts_key"])
        self.verdicts = [Verdict.from_dict(doc) for doc in judge_output["verdicts"]]
        if not self.verdicts:
            raise EvalForgeError(f"context key {p['verdicts_key']!r} holds no verdicts")
        self.texts: dict[str, str] = {}
        for pair in judge_output["pairs"]:
            a_id = pair.get("response_a_id") or f"{pair['pair_id']}:a"
            b_id = pair.get("response_b_id") or f"{pair['pair_id']}:b"
            self.texts[a_id] = pair["response_a"]
            self.texts[b_id] = pair["response_b"]
        self.humans = load_preferences(p["humans"]) if p["humans"] else None

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        report: dict = {}

        pairs = order_pairs(self.verdicts)
        if pairs:
            bias = position_bias_rate(pairs)
            report["position_bias_rate"] = bias.position_bias_rate
            report["position_bias_n_pairs"] = bias.n_pairs

        rate, eligible = length_preference_rate(self.verdicts, self.texts)
        report["length_preference_rate"] = rate
        report["length_preference_n"] = eligible

        if self.humans is not None:
            labels = evaluator_labels(self.verdicts)
            joined = [
                (labels[h.pair_id], h.human_label)
                for h in self.humans
                if h.mode == "pairwise" and h.pair_id in labels
            ]
            report["agreement_accuracy"] = agreement_accuracy(
                self.verdicts, self.humans, exclude_ties=p["exclude_ties"]
            )
            if joined:
                report["cohen_kappa"] = cohen_kappa(
                    [e for e, _ in joined], [h for _, h in joined]
                )
            report["n_joined"] = len(joined)
        self.report = report

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        key = self.output_key()
        ctx.write_artifact(f"metrics/{key}.json", pretty_dumps(self.report))
        ctx.set(key, self.report)
