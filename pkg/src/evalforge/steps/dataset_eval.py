"""Dataset evaluation step: renders prompts, dispatches, grades, aggregates."""

from __future__ import annotations

from ..context import ExecutionContext
from ..data import load_dataset, sample_few_shot
from ..errors import EvalForgeError
from ..gateway.core import InferenceGateway
from ..gateway.types import InferenceRequest
from ..jsonutil import canonical_dumps, pretty_dumps, sha256_hex
from ..pipeline import Step
from ..prompts import render_prompt, resolve_template
from ..schema import Field
from ..scoring import aggregate, option_scores, score_cloze, score_mcp, InstanceResult
from ..seeding import derive_subseed


class DatasetEvalStep(Step):
    kind = "dataset_eval"
    params_schema = {
        "dataset": Field("str", required=True),
        "model": Field("str", required=True),
        "regime": Field("str", default="MCP", choices=("CP", "MCP")),
        "template": Field("str", default="PromptA"),
        "shots": Field("int", default=0, min=0),
        "shot_pool": Field("str"),
        "per_instance_shots": Field("bool", default=False),
        "normalize": Field("str", default="sum", choices=("sum", "mean")),
        "max_tokens": Field("int", default=32, min=1),
        "temperature": Field("float", default=0.0, min=0),
        "output_key": Field("str"),
    }

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        self.instances = load_dataset(p["dataset"])
        self.template = resolve_template(p["regime"], p["template"])
        if not gateway.has_model(p["model"]):
            raise EvalForgeError(f"no backend serves model {p['model']!r}")
        if p["regime"] == "CP":
            gateway.check_score_capable(p["model"])
        pool = load_dataset(p["shot_pool"]) if p["shot_pool"] else self.instances
        self.shots_for = self._plan_shots(pool)
        self.rendered = [
            render_prompt(inst, self.shots_for[inst.instance_id], self.template)
            for inst in self.instances
        ]

    def _plan_shots(self, pool):
        p = self.params
        n = p["shots"]
        if n == 0:
            return {inst.instance_id: [] for inst in self.instances}
        if p["per_instance_shots"]:
            return {
                inst.instance_id: sample_few_shot(
                    pool, n, derive_subseed(self.seed, inst.instance_id), inst.instance_id
                )
                for inst in self.instances
            }
        # Shared exemplars keep the prompt prefix identical across instances,
        # which maximizes cache reuse. Use a separate shot_pool to rule out
        # an instance serving as its own exemplar.
        shared = sample_few_shot(pool, n, self.seed)
        return {inst.instance_id: shared for inst in self.instances}

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        requests: list[InferenceRequest] = []
        if p["regime"] == "MCP":
            for rp in self.rendered:
                requests.append(
                    InferenceRequest.generate(
                        rp.text,
                        p["model"],
                        max_tokens=p["max_tokens"],
                        temperature=p["temperature"],
                    )
                )
        else:
            for rp in self.rendered:
                for context_text, continuation in rp.option_pairs:
                    requests.append(
                        InferenceRequest.score(context_text, continuation, p["model"])
                    )
        self.responses = gateway.submit_batch(requests)

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        errored = [r for r in self.responses if r.finish_reason == "error"]
        if errored:
            raise EvalForgeError(
                f"{len(errored)} of {len(self.responses)} inference requests failed; "
                f"first error: {errored[0].error}"
            )
        results: list[InstanceResult] = []
        if p["regime"] == "MCP":
            for inst, rp, resp in zip(self.instances, self.rendered, self.responses):
                if inst.gold_index is None:
                    raise EvalForgeError(
                        f"instance {inst.instance_id!r} has no gold_index for MCP grading"
                    )
                # only labels the prompt actually offered count as answers
                offered = self.template.option_labels[: len(inst.options)]
                results.append(score_mcp(resp, inst.gold_index, offered, inst.instance_id))
        else:
            cursor = 0
            for inst, rp in zip(self.instances, self.rendered):
                n_options = len(rp.option_pairs)
                per_option = []
                for resp in self.responses[cursor : cursor + n_options]:
                    per_option.append([lp for _, lp in resp.token_logprobs if lp is not None])
                cursor += n_options
                predicted = score_cloze(per_option, p["normalize"])
                if inst.gold_index is None:
                    raise EvalForgeError(
                        f"instance {inst.instance_id!r} has no gold_index for CP grading"
                    )
                results.append(
                    InstanceResult(
                        instance_id=inst.instance_id,
                        predicted_index=predicted,
                        correct=predicted == inst.gold_index,
                        unparsed=False,
                        per_option_scores=option_scores(per_option, p["normalize"]),
                    )
                )

        groups = {
            inst.instance_id: inst.metadata["group"]
            for inst in self.instances
            if "group" in inst.metadata
        }
        table = aggregate(results, groups or None)
        key = self.output_key()

        prompt_digest = {
            rp.instance_id: sha256_hex(
                rp.text if rp.text is not None else "\x1f".join(
                    c + "\x1e" + t for c, t in rp.option_pairs
                )
            )
            for rp in self.rendered
        }
        lines = []
        for result in results:
            doc = result.to_dict()
            doc["prompt_sha256"] = prompt_digest[result.instance_id]
            lines.append(canonical_dumps(doc))
        ctx.write_artifact(
            f"results/{key}.jsonl",
            "".join(line + "\n" for line in lines),
        )
        ctx.write_artifact(f"metrics/{key}.json", pretty_dumps(table.to_dict()))
        ctx.set(
            key,
            {
                "metric": table.to_dict(),
                "results": [r.to_dict() for r in results],
                "regime": p["regime"],
                "template_id": self.template.template_id,
                "prompt_sha256": prompt_digest,
            },
        )
