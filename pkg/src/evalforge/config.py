"""Pipeline config parsing, validation, and canonical serialization.

Configs are JSON. The canonical form is the fully-populated document
(defaults filled in) rendered with sorted keys, UTF-8, two-space indent, and
LF line endings, so it is hashable and diff-friendly. Secrets never enter the
canonical form: ``auth_token`` is accepted at parse time but stripped on
serialization; supply tokens via ``EVALFORGE_API_TOKEN_<BACKEND_ID>``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .gateway.types import BackendConfig, DEFAULT_TIMEOUT
from .jsonutil import pretty_dumps

DEFAULT_WORKERS = 8
_U64_MAX = (1 << 64) - 1


@dataclass
class StepConfig:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class GatewaySettings:
    retries: int = 3
    backoff_base: float = 1.0

    def validate(self) -> None:
        if self.retries < 1:
            raise ConfigError("gateway.retries must be >= 1")
        if self.backoff_base < 0:
            raise ConfigError("gateway.backoff_base must be >= 0")


@dataclass
class PipelineConfig:
    pipeline_id: str
    steps: list[StepConfig]
    backends: list[BackendConfig]
    output_dir: str
    seed: int
    workers: int = DEFAULT_WORKERS
    cache_dir: str | None = None
    gateway: GatewaySettings = field(default_factory=GatewaySettings)

    def resolved_cache_dir(self) -> str:
        if self.cache_dir:
            return self.cache_dir
        env = os.environ.get("EVALFORGE_CACHE_DIR")
        if env:
            return env
        return os.path.join(os.path.expanduser("~"), ".cache", "evalforge")

    def to_dict(self) -> dict:
        return {
            "pipeline_id": self.pipeline_id,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "cache_dir": self.cache_dir,
            "gateway": {
                "retries": self.gateway.retries,
                "backoff_base": self.gateway.backoff_base,
            },
            "backends": [
                {
                    "backend_id": b.backend_id,
                    "base_url": b.base_url,
                    "api_kind": b.api_kind,
                    "model_name": b.model_name,
                    "max_requests_per_minute": b.max_requests_per_minute,
                    "weight": b.weight,
                    "timeout": b.timeout,
                }
                for b in self.backends
            ],
            "steps": [{"kind": s.kind, "params": dict(s.params)} for s in self.steps],
        }


def serialize_config(config: PipelineConfig) -> str:
    """Render the canonical form (sorted keys, LF lines, no secrets)."""
    return pretty_dumps(config.to_dict())


def _require(doc: dict, name: str, where: str):
    if name not in doc:
        raise ConfigError(f"{where}: missing required field {name!r}")
    return doc[name]


def _parse_backend(doc: dict, index: int) -> BackendConfig:
    where = f"backends[{index}]"
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: must be an object")
    known = {
        "backend_id", "base_url", "api_kind", "model_name", "auth_token",
        "max_requests_per_minute", "weight", "timeout",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(f"{where}: unknown field {key!r}")
    backend = BackendConfig(
        backend_id=_require(doc, "backend_id", where),
        base_url=_require(doc, "base_url", where),
        api_kind=_require(doc, "api_kind", where),
        model_name=_require(doc, "model_name", where),
        auth_token=doc.get("auth_token"),
        max_requests_per_minute=doc.get("max_requests_per_minute"),
        weight=doc.get("weight", 1),
        timeout=doc.get("timeout", DEFAULT_TIMEOUT),
    )
    if backend.auth_token is None:
        env_key = f"EVALFORGE_API_TOKEN_{backend.backend_id.upper()}"
        backend.auth_token = os.environ.get(env_key)
    backend.validate()
    return backend


def parse_config(raw: bytes | str, registry=None) -> PipelineConfig:
    """Parse and validate a pipeline config document.

    When a step registry is supplied, every step kind is resolved and its
    params are validated against the kind's declared schema (with defaults
    applied), so an invalid step is rejected before anything runs. File paths
    referenced by params are only checked for existence at step preprocess
    time, never here.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    known = {
        "pipeline_id", "steps", "backends", "output_dir", "seed",
        "workers", "cache_dir", "gateway",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(f"config: unknown field {key!r}")

    pipeline_id = _require(doc, "pipeline_id", "config")
    if not isinstance(pipeline_id, str) or not pipeline_id:
        raise ConfigError("config: pipeline_id must be a non-empty string")

    seed = _require(doc, "seed", "config")
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= _U64_MAX:
        raise ConfigError("config: seed must be an unsigned 64-bit integer")

    output_dir = _require(doc, "output_dir", "config")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("config: output_dir must be a non-empty string")

    workers = doc.get("workers", DEFAULT_WORKERS)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        raise ConfigError("config: workers must be an integer >= 1")

    cache_dir = doc.get("cache_dir")
    if cache_dir is not None and not isinstance(cache_dir, str):
        raise ConfigError("config: cache_dir must be a string")

    gw_doc = doc.get("gateway", {})
    if not isinstance(gw_doc, dict):
        raise ConfigError("config: gateway must be an object")
    gateway = GatewaySettings(
        retries=gw_doc.get("retries", 3),
        backoff_base=gw_doc.get("backoff_base", 1.0),
    )
    gateway.validate()

    backends_doc = _require(doc, "backends", "config")
    if not isinstance(backends_doc, list):
        raise ConfigError("config: backends must be a list")
    backends = [_parse_backend(b, i) for i, b in enumerate(backends_doc)]
    seen_ids = set()
    for b in backends:
        if b.backend_id in seen_ids:
            raise ConfigError(f"config: duplicate backend_id {b.backend_id!r}")
        seen_ids.add(b.backend_id)

    steps_doc = _require(doc, "steps", "config")
    if not isinstance(steps_doc, list):
        raise ConfigError("config: steps must be a list")
    if not steps_doc:
        raise ConfigError("config: steps must be non-empty")
    steps = []
    for i, step_doc in enumerate(steps_doc):
        where = f"steps[{i}]"
        if not isinstance(step_doc, dict):
            raise ConfigError(f"{where}: must be an object")
        kind = _require(step_doc, "kind", where)
        params = step_doc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{where}: params must be an object")
        unknown = set(step_doc) - {"kind", "params"}
        if unknown:
            raise ConfigError(f"{where}: unknown field {sorted(unknown)[0]!r}")
        if registry is not None:
            from .errors import RegistryError

            try:
                step_cls = registry.resolve(kind)
            except RegistryError as exc:
                raise ConfigError(str(exc)) from exc
            params = step_cls.validate_params(params)
        steps.append(StepConfig(kind=kind, params=params))

    return PipelineConfig(
        pipeline_id=pipeline_id,
        steps=steps,
        backends=backends,
        output_dir=output_dir,
        seed=seed,
        workers=workers,
        cache_dir=cache_dir,
        gateway=gateway,
    )
