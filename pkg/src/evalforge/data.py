"""Dataset loading, validation, and seeded few-shot sampling.

Datasets are JSON Lines files, one record per line with fields ``id?``,
``question``, ``options?``, ``gold_index?``, ``gold_text?``, ``meta?``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DatasetError


@dataclass
class EvalInstance:
    """One dataset item, as loaded from a JSONL record."""

    instance_id: str
    question: str
    options: list[str] = field(default_factory=list)
    gold_index: int | None = None
    gold_text: str | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def gold_answer(self) -> str | None:
        """The gold answer surface string, whichever form is present."""
        if self.gold_index is not None:
            return self.options[self.gold_index]
        return self.gold_text

    def to_record(self) -> dict:
        rec: dict = {"id": self.instance_id, "question": self.question}
        if self.options:
            rec["options"] = list(self.options)
        if self.gold_index is not None:
            rec["gold_index"] = self.gold_index
        if self.gold_text is not None:
            rec["gold_text"] = self.gold_text
        if self.metadata:
            rec["meta"] = dict(self.metadata)
        return rec


def _instance_from_record(rec: dict, line_no: int) -> EvalInstance:
    if not isinstance(rec, dict):
        raise DatasetError(f"line {line_no}: record must be a JSON object")
    question = rec.get("question")
    if not isinstance(question, str) or not question:
        raise DatasetError(f"line {line_no}: missing or empty 'question'")
    options = rec.get("options", [])
    if not isinstance(options, list) or not all(isinstance(o, str) for o in options):
        raise DatasetError(f"line {line_no}: 'options' must be a list of strings")
    gold_index = rec.get("gold_index")
    gold_text = rec.get("gold_text")
    if gold_index is not None and gold_text is not None:
        raise DatasetError(
            f"line {line_no}: 'gold_index' and 'gold_text' are mutually exclusive"
        )
    if gold_index is not None:
        if not isinstance(gold_index, int) or isinstance(gold_index, bool):
            raise DatasetError(f"line {line_no}: 'gold_index' must be an integer")
        if not 0 <= gold_index < len(options):
            raise DatasetError(
                f"line {line_no}: gold_index {gold_index} out of range for "
                f"{len(options)} options"
            )
    meta = rec.get("meta", {})
    if not isinstance(meta, dict):
        raise DatasetError(f"line {line_no}: 'meta' must be an object")
    instance_id = rec.get("id", f"line-{line_no}")
    if not isinstance(instance_id, str) or not instance_id:
        raise DatasetError(f"line {line_no}: 'id' must be a non-empty string")
    return EvalInstance(
        instance_id=instance_id,
        question=question,
        options=list(options),
        gold_index=gold_index,
        gold_text=gold_text,
        metadata=dict(meta),
    )


def load_dataset(path: str | Path, format: str = "jsonl") -> list[EvalInstance]:
    """Load a JSONL dataset, preserving file order.

    Records without an explicit ``id`` get ``line-<n>`` (1-based line number).
    Raises ``DatasetError`` on malformed lines, out-of-range gold indices, or
    duplicate explicit ids (naming both offending lines).
    """
    if format != "jsonl":
        raise DatasetError(f"unsupported dataset format: {format!r}")
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    instances: list[EvalInstance] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
            inst = _instance_from_record(rec, line_no)
            if inst.instance_id in seen:
                raise DatasetError(
                    f"duplicate id {inst.instance_id!r} on lines "
                    f"{seen[inst.instance_id]} and {line_no}"
                )
            seen[inst.instance_id] = line_no
            instances.append(inst)
    return instances


def save_dataset(instances: list[EvalInstance], path: str | Path) -> None:
    """Write instances as JSONL, one record per line, preserving order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def sample_few_shot(
    pool: list[EvalInstance],
    n: int,
    seed: int,
    exclude_id: str | None = None,
) -> list[EvalInstance]:
    """Seeded exemplar sampling: Fisher-Yates shuffle, take the first ``n``.

    The pool is sorted by instance_id before shuffling so the result depends
    only on the set of instances and the seed, not on file order. Exemplars
    never include ``exclude_id`` and contain no duplicates.
    """
    candidates = [inst for inst in pool if inst.instance_id != exclude_id]
    if n > len(candidates):
        raise DatasetError(
            f"pool too small: need {n} exemplars, have {len(candidates)} "
            f"after excluding {exclude_id!r}"
        )
    candidates.sort(key=lambda inst: inst.instance_id)
    rng = random.Random(seed)
    rng.shuffle(candidates)
    return candidates[:n]
