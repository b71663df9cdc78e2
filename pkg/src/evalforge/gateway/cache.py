"""Content-addressed response cache: one JSON file per request hash.

Entries live under ``cache_dir/<first 2 hex>/<key>.json`` and store the
canonical request alongside the response so past runs can be audited. Writes
go to a temp file then rename, so a crash never leaves a torn entry. Corrupt
files are quarantined (renamed ``*.corrupt``) and treated as misses.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

from ..jsonutil import pretty_dumps
from .types import InferenceRequest, InferenceResponse, cache_key

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class CacheEntry:
    key: str
    request: InferenceRequest
    response: InferenceResponse
    created_at: float

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "key": self.key,
            "request": self.request.to_dict(),
            "response": self.response.to_dict(),
            "created_at": self.created_at,
        }


class ResponseCache:
    def __init__(self, cache_dir: str | Path):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def lookup(self, key: str) -> CacheEntry | None:
        path = self._path(key)
        if not path.is_file():
            return None
        try:
            doc = json.loads(path.read_text("utf-8"))
            entry = CacheEntry(
                key=doc["key"],
                request=InferenceRequest.from_dict(doc["request"]),
                response=InferenceResponse.from_dict(doc["response"]),
                created_at=doc["created_at"],
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            quarantined = path.with_suffix(".corrupt")
            try:
                os.replace(path, quarantined)
            except OSError:
                pass
            logger.warning("quarantined corrupt cache entry %s (%s)", path, exc)
            return None
        if entry.key != key:
            logger.warning("cache entry %s has mismatched key; ignoring", path)
            return None
        return entry

    def store(self, request: InferenceRequest, response: InferenceResponse) -> CacheEntry:
        """Persist a successful response. Error responses are never cached."""
        if response.finish_reason == "error":
            raise ValueError("refusing to cache an error response")
        key = cache_key(request)
        stored = InferenceResponse.from_dict(response.to_dict())
        stored.cached = False  # entries record the original network result
        entry = CacheEntry(key=key, request=request, response=stored, created_at=time.time())
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
        tmp.write_text(pretty_dumps(entry.to_dict()), "utf-8")
        os.replace(tmp, path)
        return entry
