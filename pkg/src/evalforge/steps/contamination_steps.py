"""Contamination detection and reference-set generation steps."""

from __future__ import annotations

import json
from importlib import resources

from ..contamination import (
    DEFAULT_K_PERCENT,
    TokenScoredText,
    compare_loss,
    contamination_text,
    detect_min_k,
    generate_reference_set,
)
from ..context import ExecutionContext
from ..data import EvalInstance, load_dataset, save_dataset
from ..errors import EvalForgeError
from ..gateway.core import InferenceGateway
from ..gateway.types import InferenceRequest
from ..jsonutil import pretty_dumps
from ..pipeline import Step
from ..schema import Field


def _score_texts(
    gateway: InferenceGateway, instances: list[EvalInstance], model: str, workers: int
) -> list[TokenScoredText]:
    """Score each instance's full text unconditioned (empty context)."""
    requests = [
        InferenceRequest.score("", contamination_text(inst), model) for inst in instances
    ]
    responses = gateway.submit_batch(requests, workers=workers)
    scored = []
    for inst, resp in zip(instances, responses):
        if resp.finish_reason == "error":
            raise EvalForgeError(
                f"scoring failed for instance {inst.instance_id!r}: {resp.error}"
            )
        scored.append(
            TokenScoredText.from_raw(
                inst.instance_id,
                contamination_text(inst),
                [lp for _, lp in resp.token_logprobs],
            )
        )
    return scored


class MinKDetectStep(Step):
    kind = "min_k_detect"
    params_schema = {
        "dataset": Field("str", required=True),
        "model": Field("str", required=True),
        "k_percent": Field("float", default=DEFAULT_K_PERCENT, min=0.000001, max=100),
        "threshold": Field("float", required=True),
        "output_key": Field("str"),
    }

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        self.instances = load_dataset(self.params["dataset"])
        gateway.check_score_capable(self.params["model"])

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        self.scored = _score_texts(
            gateway, self.instances, self.params["model"], self.config.workers
        )

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        report = detect_min_k(
            self.scored, self.params["k_percent"], self.params["threshold"]
        )
        key = self.output_key()
        ctx.write_artifact(f"contamination/{key}.json", pretty_dumps(report.to_dict()))
        ctx.set(key, report.to_dict())


class AvgLossDetectStep(Step):
    kind = "avg_loss_detect"
    params_schema = {
        "dataset": Field("str", required=True),
        "model": Field("str", required=True),
        "delta_threshold": Field("float", required=True),
        "reference": Field("str"),
        "reference_key": Field("str"),
        "output_key": Field("str"),
    }

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        if bool(p["reference"]) == bool(p["reference_key"]):
            raise EvalForgeError(
                "avg_loss_detect needs exactly one of 'reference' (a dataset path) "
                "or 'reference_key' (a context key from a data_generate step)"
            )
        self.instances = load_dataset(p["dataset"])
        if p["reference"]:
            self.reference = load_dataset(p["reference"])
        else:
            value = ctx.get(p["reference_key"])
            self.reference = [
                EvalInstance(
                    instance_id=doc["id"],
                    question=doc["question"],
                    options=doc.get("options", []),
                    gold_index=doc.get("gold_index"),
                    gold_text=doc.get("gold_text"),
                    metadata=doc.get("meta", {}),
                )
                for doc in value["instances"]
            ]
        if not self.reference:
            raise EvalForgeError("reference set is empty")
        gateway.check_score_capable(p["model"])

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        self.scored_test = _score_texts(
            gateway, self.instances, p["model"], self.config.workers
        )
        self.scored_reference = _score_texts(
            gateway, self.reference, p["model"], self.config.workers
        )

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        report = compare_loss(
            self.scored_test, self.scored_reference, self.params["delta_threshold"]
        )
        key = self.output_key()
        ctx.write_artifact(f"contamination/{key}.json", pretty_dumps(report.to_dict()))
        ctx.set(key, report.to_dict())


class DataGenerateStep(Step):
    kind = "data_generate"
    params_schema = {
        "seed_dataset": Field("str", required=True),
        "model": Field("str", required=True),
        "n": Field("int", required=True, min=0),
        "template": Field("str"),
        "exemplars": Field("int", default=3, min=1),
        "retries": Field("int", default=2, min=0),
        "hard_fail": Field("bool", default=False),
        "max_tokens": Field("int", default=256, min=1),
        "temperature": Field("float", default=0.7, min=0),
        "output_key": Field("str"),
    }

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params
        self.seed_instances = load_dataset(p["seed_dataset"])
        if not gateway.has_model(p["model"]):
            raise EvalForgeError(f"no backend serves model {p['model']!r}")
        if p["template"]:
            with open(p["template"], encoding="utf-8") as fh:
                self.template_text = json.load(fh)["prompt"]
        else:
            raw = resources.files("evalforge.templates").joinpath("data_generator.json")
            self.template_text = json.loads(raw.read_text("utf-8"))["prompt"]

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        p = self.params

        def generate_fn(prompt: str) -> str:
            response = gateway.submit(
                InferenceRequest.generate(
                    prompt, p["model"],
                    max_tokens=p["max_tokens"], temperature=p["temperature"],
                )
            )
            if response.finish_reason == "error":
                raise EvalForgeError(f"generation failed: {response.error}")
            return response.text

        self.generated = generate_reference_set(
            self.seed_instances,
            generate_fn,
            p["n"],
            self.template_text,
            seed=self.seed,
            exemplar_count=p["exemplars"],
            retries=p["retries"],
            hard_fail=p["hard_fail"],
        )

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        key = self.output_key()
        path = ctx.artifacts_dir / "generated" / f"{key}.jsonl"
        save_dataset(self.generated, path)
        ctx.set(
            key,
            {
                "instances": [inst.to_record() for inst in self.generated],
                "path": str(path),
                "requested": self.params["n"],
                "produced": len(self.generated),
            },
        )
