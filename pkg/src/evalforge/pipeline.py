"""Sequential step execution with the three-phase lifecycle and run manifest.

Each step runs preprocess (load and check inputs), run (the actual work,
typically gateway batches), then postprocess (parse outputs, aggregate, write
artifacts). The first failure aborts the pipeline; partial artifacts stay on
disk for inspection and the manifest records everything written so far. A
completed or aborted run leaves ``manifest.json`` in the output directory
with the canonical config, the event log, and a SHA-256 digest of every
artifact file.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path

from .config import PipelineConfig
from .context import ExecutionContext, StepEvent
from .errors import StepFailure
from .gateway.core import InferenceGateway, RetryPolicy
from .jsonutil import pretty_dumps, sha256_file
from .registry import StepRegistry, default_registry
from .schema import Field, validate_params
from .seeding import derive_step_seed

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class Step:
    """Base class for pipeline steps.

    Subclasses declare ``kind`` and ``params_schema`` and implement the three
    phases. ``self.params`` holds schema-validated params with defaults
    applied; ``self.seed`` is the step's derived seed.
    """

    kind: str = ""
    params_schema: dict[str, Field] = {}

    def __init__(self, index: int, params: dict, config: PipelineConfig):
        self.index = index
        self.params = self.validate_params(params)
        self.config = config
        self.seed = derive_step_seed(config.seed, index)

    @classmethod
    def validate_params(cls, params: dict) -> dict:
        return validate_params(cls.kind, cls.params_schema, params)

    def output_key(self) -> str:
        return self.params.get("output_key") or f"step{self.index}_{self.kind}"

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        pass

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        pass

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        pass


def build_gateway(config: PipelineConfig) -> InferenceGateway:
    return InferenceGateway(
        backends=config.backends,
        workers=config.workers,
        cache_dir=config.resolved_cache_dir(),
        retry=RetryPolicy(
            attempts=config.gateway.retries,
            backoff_base=config.gateway.backoff_base,
        ),
    )


def run_pipeline(
    config: PipelineConfig,
    registry: StepRegistry | None = None,
    gateway: InferenceGateway | None = None,
) -> ExecutionContext:
    """Execute all steps in order; returns the final context.

    Raises ``StepFailure`` on the first failing phase after writing the
    manifest for whatever was produced.
    """
    registry = registry or default_registry()
    gateway = gateway or build_gateway(config)
    ctx = ExecutionContext(config.output_dir)

    steps = [
        registry.resolve(sc.kind)(index=i, params=sc.params, config=config)
        for i, sc in enumerate(config.steps)
    ]

    failure: StepFailure | None = None
    for step in steps:
        for phase in ("preprocess", "run", "postprocess"):
            ctx.run_log.append(StepEvent(step.index, phase, "started"))
            start = time.monotonic()
            try:
                getattr(step, phase)(ctx, gateway)
            except Exception as exc:
                wall = time.monotonic() - start
                ctx.run_log.append(
                    StepEvent(step.index, phase, "failed", wall_time=wall, error=str(exc))
                )
                logger.error("step %d (%s) failed in %s: %s", step.index, step.kind, phase, exc)
                failure = StepFailure(step.index, phase, str(exc))
                failure.__cause__ = exc
                break
            wall = time.monotonic() - start
            ctx.run_log.append(StepEvent(step.index, phase, "finished", wall_time=wall))
        if failure is not None:
            break

    write_manifest(config, ctx)
    if failure is not None:
        raise failure
    return ctx


def write_manifest(config: PipelineConfig, ctx: ExecutionContext) -> Path:
    """Digest every file under the output dir into manifest.json."""
    out_dir = ctx.artifacts_dir
    outputs = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != MANIFEST_NAME:
            outputs[str(path.relative_to(out_dir))] = sha256_file(path)
    manifest = {
        "schema": 1,
        "pipeline_id": config.pipeline_id,
        "config": config.to_dict(),
        "events": [e.to_dict() for e in ctx.run_log],
        "outputs": outputs,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(pretty_dumps(manifest), "utf-8")
    return path
