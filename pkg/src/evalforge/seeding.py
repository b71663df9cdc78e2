"""Deterministic seed derivation for steps and sub-sampling.

Every source of randomness in a pipeline is keyed off the config seed. Each
step receives ``derive_step_seed(seed, step_index)``; inserting or reordering
steps therefore changes later steps' sampling unless their indices are pinned.
Sub-streams (per-instance shot sampling, annotation order randomization) hang
off a step seed plus a string tag.
"""

from __future__ import annotations

import hashlib

_U64 = 1 << 64


def derive_step_seed(seed: int, step_index: int) -> int:
    """SHA-256 over (seed, step_index), truncated to 64 bits."""
    payload = seed.to_bytes(8, "big") + step_index.to_bytes(8, "big")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") % _U64


def derive_subseed(seed: int, tag: str) -> int:
    """SHA-256 over (seed, tag), truncated to 64 bits."""
    payload = seed.to_bytes(8, "big") + tag.encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") % _U64
