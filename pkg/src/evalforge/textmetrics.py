"""Reference-based text metrics: exact match and ROUGE-L.

The ``embedding/*`` metric-name namespace is reserved for future
embedding-based metrics and deliberately unimplemented here.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_text(
    text: str,
    lowercase: bool = True,
    strip_punct: bool = True,
    squeeze_ws: bool = True,
) -> str:
    if lowercase:
        text = text.lower()
    if strip_punct:
        text = text.translate(_PUNCT_TABLE)
    if squeeze_ws:
        text = re.sub(r"\s+", " ", text).strip()
    return text


def exact_match(
    candidate: str,
    reference: str,
    lowercase: bool = True,
    strip_punct: bool = True,
    squeeze_ws: bool = True,
) -> int:
    """1 iff the normalized strings are equal, else 0."""
    kwargs = dict(lowercase=lowercase, strip_punct=strip_punct, squeeze_ws=squeeze_ws)
    return int(normalize_text(candidate, **kwargs) == normalize_text(reference, **kwargs))


def lcs_length(a: list[str], b: list[str]) -> int:
    """Longest common subsequence length via the standard DP, O(len(a)*len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


@dataclass
class RougeScore:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def rouge_l(candidate: list[str], reference: list[str]) -> RougeScore:
    """LCS-based ROUGE-L over pre-tokenized sequences.

    P = LCS/|candidate|, R = LCS/|reference|, F1 = 2PR/(P+R) with zero
    scores when either side is empty or nothing overlaps.
    """
    if not candidate or not reference:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    if precision + recall == 0:
        return RougeScore(0.0, 0.0, 0.0)
    f1 = 2 * precision * recall / (precision + recall)
    return RougeScore(precision, recall, f1)
