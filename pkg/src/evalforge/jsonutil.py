"""Canonical JSON forms used for hashing, manifests, and config round-trips."""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_dumps(obj: Any) -> str:
    """Compact canonical JSON: sorted keys, UTF-8 friendly, no extra whitespace.

    Used wherever bytes must be stable enough to hash (cache keys, digests).
    """
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def pretty_dumps(obj: Any) -> str:
    """Human-readable canonical JSON: sorted keys, two-space indent, LF lines."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
