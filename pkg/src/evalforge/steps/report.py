"""Report step: consolidates context outputs into one human-readable file."""

from __future__ import annotations

from ..context import ExecutionContext
from ..gateway.core import InferenceGateway
from ..jsonutil import pretty_dumps
from ..pipeline import Step
from ..schema import Field


def _render_value(key: str, value) -> list[str]:
    lines = [f"== {key} =="]
    if isinstance(value, dict):
        if "metric" in value:
            metric = value["metric"]
            lines.append(
                f"  {metric['metric_name']}: {metric['overall']:.4f} "
                f"(n={metric['n']}, unparsed_rate={metric['unparsed_rate']:.4f})"
            )
            for group, rate in sorted(metric.get("by_group", {}).items()):
                lines.append(f"    {group}: {rate:.4f}")
        elif "aggregate" in value:
            agg = value["aggregate"]
            lines.append(f"  method: {value.get('method')}")
            for name, stat in sorted(agg.items()):
                lines.append(f"  {name}: {stat}")
        else:
            for name, stat in sorted(value.items()):
                if isinstance(stat, (int, float, str, bool)) or stat is None:
                    lines.append(f"  {name}: {stat}")
    else:
        lines.append(f"  {value}")
    return lines


class ReportStep(Step):
    kind = "report"
    params_schema = {
        "keys": Field("list"),
        "output_key": Field("str"),
    }

    def preprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        wanted = self.params["keys"]
        self.keys = list(wanted) if wanted else ctx.keys()

    def run(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        self.collected = {key: ctx.get(key) for key in self.keys}

    def postprocess(self, ctx: ExecutionContext, gateway: InferenceGateway) -> None:
        lines = [f"pipeline: {self.config.pipeline_id}", ""]
        for key in self.keys:
            lines.extend(_render_value(key, self.collected[key]))
            lines.append("")
        ctx.write_artifact("report/report.txt", "\n".join(lines))
        ctx.write_artifact("report/report.json", pretty_dumps(self.collected))
        ctx.set(self.output_key(), {"keys": self.keys})
