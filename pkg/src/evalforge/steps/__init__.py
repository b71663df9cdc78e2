"""Built-in pipeline step kinds."""

from __future__ import annotations


def register_builtin_steps(registry) -> None:
    from .contamination_steps import AvgLossDetectStep, DataGenerateStep, MinKDetectStep
    from .dataset_eval import DatasetEvalStep
    from .llm_judge import LlmJudgeStep
    from .meta_eval import MetaEvalStep
    from .report import ReportStep

    for step_cls in (
        DatasetEvalStep,
        LlmJudgeStep,
        MinKDetectStep,
        AvgLossDetectStep,
        DataGenerateStep,
        MetaEvalStep,
        ReportStep,
    ):
        registry.register(step_cls.kind, step_cls)
