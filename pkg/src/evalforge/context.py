"""Shared execution context: write-once key/value store plus the run log.

Steps communicate only through this map; a key written by step i is readable
by all later steps, and a second write to the same key is an error. The
context also owns the artifacts directory, so steps persist files through it
and the manifest can digest everything at the end of the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ContextKeyError


@dataclass
class StepEvent:
    step_index: int
    phase: str  # "preprocess", "run", or "postprocess"
    status: str  # "started", "finished", or "failed"
    wall_time: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        doc: dict = {
            "step_index": self.step_index,
            "phase": self.phase,
            "status": self.status,
            "wall_time": self.wall_time,
        }
        if self.error is not None:
            doc["error"] = self.error
        return doc


class ExecutionContext:
    def __init__(self, artifacts_dir: str | Path):
        self.artifacts_dir = Path(artifacts_dir)
        self.artifacts_dir.mkdir(parents=True, exist_ok=True)
        self._values: dict[str, Any] = {}
        self.run_log: list[StepEvent] = []

    def set(self, key: str, value: Any) -> None:
        if key in self._values:
            raise ContextKeyError(f"context key {key!r} already written (keys are write-once)")
        self._values[key] = value

    def get(self, key: str) -> Any:
        if key not in self._values:
            raise ContextKeyError(f"context key {key!r} not found")
        return self._values[key]

    def has(self, key: str) -> bool:
        return key in self._values

    def keys(self) -> list[str]:
        return list(self._values)

    def write_artifact(self, relpath: str, text: str) -> Path:
        """Write a text artifact under the run directory; returns its path."""
        path = self.artifacts_dir / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, "utf-8")
        return path
