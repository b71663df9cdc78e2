"""Converters from public meta-evaluation dataset formats to PreferenceRecord.

The datasets themselves are not bundled (licensing); users point these at
their own copies. Each converter maps one record of the upstream schema to a
``PreferenceRecord``; unknown winners degrade to ties rather than dropping
the record.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import EvalForgeError
from .metaeval import PreferenceRecord


def convert_pandalm(doc: dict, index: int) -> PreferenceRecord:
    """PandaLM test-set record: instruction/input, response1/2, label 0|1|2
    (0 = tie, 1 = response1 wins, 2 = response2 wins)."""
    label_map = {0: "tie", 1: "A", 2: "B"}
    question = doc.get("instruction", "")
    if doc.get("input"):
        question = f"{question}\n{doc['input']}"
    label = doc.get("annotator1", doc.get("label"))
    if label not in label_map:
        raise EvalForgeError(f"pandalm record {index}: bad label {label!r}")
    return PreferenceRecord(
        pair_id=str(doc.get("id", index)),
        question=question,
        response_a=doc.get("response1", ""),
        response_b=doc.get("response2", ""),
        human_label=label_map[label],
        annotator_id="pandalm",
    )


def _as_text(value) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, ensure_ascii=False)


def convert_mtbench(doc: dict, index: int) -> PreferenceRecord:
    """MT-Bench human judgment: winner is "model_a", "model_b", or a tie."""
    winner = doc.get("winner", "")
    if winner == "model_a":
        label = "A"
    elif winner == "model_b":
        label = "B"
    else:
        label = "tie"
    return PreferenceRecord(
        pair_id=str(doc.get("question_id", index)),
        question=doc.get("question", ""),
        response_a=_as_text(doc.get("conversation_a", doc.get("response_a", ""))),
        response_b=_as_text(doc.get("conversation_b", doc.get("response_b", ""))),
        human_label=label,
        annotator_id=str(doc.get("judge", "mtbench")),
    )


def convert_llmbar(doc: dict, index: int) -> PreferenceRecord:
    """LLMBar record: input, output_1/output_2, label 1|2."""
    label = doc.get("label")
    if label not in (1, 2):
        raise EvalForgeError(f"llmbar record {index}: bad label {label!r}")
    return PreferenceRecord(
        pair_id=str(doc.get("id", index)),
        question=doc.get("input", ""),
        response_a=doc.get("output_1", ""),
        response_b=doc.get("output_2", ""),
        human_label="A" if label == 1 else "B",
        annotator_id="llmbar",
    )


def convert_alpacaeval(doc: dict, index: int) -> PreferenceRecord:
    """AlpacaEval annotation: instruction, output_1/output_2, preference 1|2
    (fractional preferences round to the nearer side, 1.5 is a tie)."""
    pref = doc.get("preference")
    if pref is None:
        raise EvalForgeError(f"alpacaeval record {index}: missing preference")
    if pref == 1.5:
        label = "tie"
    elif pref < 1.5:
        label = "A"
    else:
        label = "B"
    return PreferenceRecord(
        pair_id=str(doc.get("id", index)),
        question=doc.get("instruction", ""),
        response_a=doc.get("output_1", ""),
        response_b=doc.get("output_2", ""),
        human_label=label,
        annotator_id=str(doc.get("annotator_index", "alpacaeval")),
    )


_CONVERTERS = {
    "pandalm": convert_pandalm,
    "mtbench": convert_mtbench,
    "llmbar": convert_llmbar,
    "alpacaeval": convert_alpacaeval,
}


def convert_file(path: str | Path, source: str) -> list[PreferenceRecord]:
    """Convert a JSON or JSONL file of the named source format."""
    if source not in _CONVERTERS:
        raise EvalForgeError(
            f"unknown source {source!r}; expected one of {sorted(_CONVERTERS)}"
        )
    convert = _CONVERTERS[source]
    path = Path(path)
    text = path.read_text("utf-8").strip()
    if text.startswith("["):
        docs = json.loads(text)
    else:
        docs = [json.loads(line) for line in text.splitlines() if line.strip()]
    records = []
    for i, doc in enumerate(docs):
        records.append(convert(doc, i))
    return records
