"""Meta-evaluation: agreement with human preferences and judge bias rates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EvalForgeError
from .judging import Verdict

LABELS = ("A", "B", "tie")


@dataclass
class PreferenceRecord:
    """One human judgment over a response pair or single response."""

    pair_id: str
    question: str
    response_a: str
    response_b: str
    human_label: str | None  # "A", "B", or "tie" (pairwise mode)
    annotator_id: str
    elapsed: float = 0.0
    mode: str = "pairwise"  # or "direct"
    score: float | None = None

    def validate(self) -> None:
        if self.mode == "pairwise":
            if self.human_label not in LABELS:
                raise EvalForgeError(
                    f"pair {self.pair_id!r}: pairwise record needs a human_label in {LABELS}"
                )
        elif self.mode == "direct":
            if self.score is None:
                raise EvalForgeError(f"pair {self.pair_id!r}: direct record needs a score")
        else:
            raise EvalForgeError(f"pair {self.pair_id!r}: unknown mode {self.mode!r}")

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "question": self.question,
            "response_a": self.response_a,
            "response_b": self.response_b,
            "human_label": self.human_label,
            "annotator_id": self.annotator_id,
            "elapsed": self.elapsed,
            "mode": self.mode,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PreferenceRecord":
        rec = cls(
            pair_id=doc["pair_id"],
            question=doc.get("question", ""),
            response_a=doc.get("response_a", ""),
            response_b=doc.get("response_b", ""),
            human_label=doc.get("human_label"),
            annotator_id=doc.get("annotator_id", ""),
            elapsed=doc.get("elapsed", 0.0),
            mode=doc.get("mode", "pairwise"),
            score=doc.get("score"),
        )
        rec.validate()
        return rec


def load_preferences(path: str | Path) -> list[PreferenceRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(PreferenceRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise EvalForgeError(f"preferences line {line_no}: {exc}") from exc
    return records


@dataclass
class BiasReport:
    position_bias_rate: float
    n_pairs: int
    length_preference_rate: float | None = None
    details: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "position_bias_rate": self.position_bias_rate,
            "length_preference_rate": self.length_preference_rate,
            "n_pairs": self.n_pairs,
            "details": self.details,
        }


def agreement_accuracy(
    verdicts: list[Verdict],
    humans: list[PreferenceRecord],
    exclude_ties: bool = False,
) -> float:
    """Fraction of joined pairs where the evaluator label equals the human
    label (ties match ties). ``exclude_ties`` drops human-tie pairs for
    comparability with setups that ignore them."""
    from .judging import evaluator_labels

    eval_labels = evaluator_labels(verdicts)
    human_by_pair = {h.pair_id: h.human_label for h in humans if h.mode == "pairwise"}
    joined = [pid for pid in eval_labels if pid in human_by_pair]
    if exclude_ties:
        joined = [pid for pid in joined if human_by_pair[pid] != "tie"]
    if not joined:
        raise EvalForgeError("no pairs joined between verdicts and human records")
    agree = sum(eval_labels[pid] == human_by_pair[pid] for pid in joined)
    return agree / len(joined)


def cohen_kappa(labels_1: list[str], labels_2: list[str]) -> float:
    """Cohen's kappa with marginal-product expected agreement.

    Degenerate marginals (expected agreement 1) return 1.0 when the lists
    are identical and 0.0 otherwise.
    """
    if len(labels_1) != len(labels_2):
        raise EvalForgeError(
            f"label lists differ in length: {len(labels_1)} vs {len(labels_2)}"
        )
    if not labels_1:
        raise EvalForgeError("cohen_kappa needs at least one label pair")
    n = len(labels_1)
    observed = sum(a == b for a, b in zip(labels_1, labels_2)) / n
    categories = set(labels_1) | set(labels_2)
    expected = sum(
        (labels_1.count(c) / n) * (labels_2.count(c) / n) for c in categories
    )
    if expected == 1.0:
        return 1.0 if labels_1 == labels_2 else 0.0
    return (observed - expected) / (1 - expected)


def position_bias_rate(verdict_pairs: list[tuple[Verdict, Verdict]]) -> BiasReport:
    """Fraction of pairs whose two presentation orders disagree.

    A pair is consistent iff both verdicts prefer the same response identity
    (ties are consistent only with ties). Verdict winners are already
    identity-mapped, so this is a direct comparison after checking the two
    verdicts really describe the same responses.
    """
    if not verdict_pairs:
        raise EvalForgeError("position_bias_rate needs at least one verdict pair")
    details = []
    inconsistent = 0
    for original, swapped in verdict_pairs:
        if (
            original.response_a_id != swapped.response_a_id
            or original.response_b_id != swapped.response_b_id
        ):
            raise EvalForgeError(
                f"pair {original.pair_id!r}: response identities differ between orders"
            )
        consistent = original.winner == swapped.winner
        inconsistent += not consistent
        details.append({"pair_id": original.pair_id, "consistent": consistent})
    return BiasReport(
        position_bias_rate=inconsistent / len(verdict_pairs),
        n_pairs=len(verdict_pairs),
        details=details,
    )


def length_preference_rate(
    verdicts: list[Verdict], texts: dict[str, str]
) -> tuple[float | None, int]:
    """Fraction of eligible verdicts preferring the longer response.

    Eligible verdicts have a strict winner and responses of strictly
    different character counts; with zero eligible verdicts the rate is
    absent (None), never 0. Character counts avoid tokenizer dependence.
    0.5 is the unbiased reference point.
    """
    eligible = 0
    longer_wins = 0
    for v in verdicts:
        if v.winner == "tie":
            continue
        len_a = len(texts[v.response_a_id])
        len_b = len(texts[v.response_b_id])
        if len_a == len_b:
            continue
        eligible += 1
        winner_len = len_a if v.winner == "A" else len_b
        if winner_len == max(len_a, len_b):
            longer_wins += 1
    if eligible == 0:
        return None, 0
    return longer_wins / eligible, eligible
