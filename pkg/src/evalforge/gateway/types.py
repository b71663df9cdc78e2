"""Wire-independent records for one model call, and backend descriptions."""

from __future__ import annotations

import urllib.parse
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..jsonutil import canonical_dumps, sha256_hex

DEFAULT_TIMEOUT = 120.0


@dataclass
class BackendConfig:
    backend_id: str
    base_url: str
    api_kind: str  # "completions" or "chat"
    model_name: str
    auth_token: str | None = None
    max_requests_per_minute: int | None = None
    weight: int = 1
    timeout: float = DEFAULT_TIMEOUT

    def validate(self) -> None:
        parsed = urllib.parse.urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ConfigError(
                f"backend {self.backend_id!r}: base_url {self.base_url!r} is not a valid URL"
            )
        if self.api_kind not in ("completions", "chat"):
            raise ConfigError(
                f"backend {self.backend_id!r}: api_kind must be 'completions' or 'chat'"
            )
        if self.max_requests_per_minute is not None and self.max_requests_per_minute < 1:
            raise ConfigError(
                f"backend {self.backend_id!r}: max_requests_per_minute must be >= 1"
            )
        if self.weight < 1:
            raise ConfigError(f"backend {self.backend_id!r}: weight must be >= 1")
        if self.timeout <= 0:
            raise ConfigError(f"backend {self.backend_id!r}: timeout must be positive")

    def supports_score(self) -> bool:
        # Score requests need echo + per-token logprobs, which only the
        # completions wire format carries.
        return self.api_kind == "completions"


@dataclass
class SamplingParams:
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 16
    stop: list[str] = field(default_factory=list)
    logprobs: bool = False
    echo: bool = False

    def validate(self) -> None:
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ConfigError("top_p must be in (0, 1]")
        if self.max_tokens < 0:
            raise ConfigError("max_tokens must be >= 0")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "stop": list(self.stop),
            "logprobs": self.logprobs,
            "echo": self.echo,
        }


@dataclass
class InferenceRequest:
    """One model call: either free generation or continuation scoring.

    Score requests carry (context, continuation) instead of a prompt and
    always set echo + logprobs so the continuation tokens come back with
    their log-probabilities.
    """

    kind: str  # "generate" or "score"
    model_name: str
    prompt: str | None = None
    context: str | None = None
    continuation: str | None = None
    params: SamplingParams = field(default_factory=SamplingParams)

    @classmethod
    def generate(cls, prompt: str, model_name: str, **param_kwargs) -> InferenceRequest:
        return cls(
            kind="generate",
            model_name=model_name,
            prompt=prompt,
            params=SamplingParams(**param_kwargs),
        )

    @classmethod
    def score(cls, context: str, continuation: str, model_name: str) -> InferenceRequest:
        params = SamplingParams(max_tokens=0, logprobs=True, echo=True)
        return cls(
            kind="score",
            model_name=model_name,
            context=context,
            continuation=continuation,
            params=params,
        )

    def validate(self) -> None:
        if self.kind == "generate":
            if self.prompt is None:
                raise ConfigError("generate request needs a prompt")
        elif self.kind == "score":
            if self.context is None or self.continuation is None:
                raise ConfigError("score request needs context and continuation")
            if not (self.params.logprobs and self.params.echo):
                raise ConfigError("score request must set logprobs and echo")
        else:
            raise ConfigError(f"unknown request kind {self.kind!r}")
        self.params.validate()

    def canonical(self) -> dict:
        """Canonical content for hashing: excludes auth and backend routing."""
        doc: dict = {
            "kind": self.kind,
            "model_name": self.model_name,
            "params": self.params.to_dict(),
        }
        if self.kind == "generate":
            doc["prompt"] = self.prompt
        else:
            doc["context"] = self.context
            doc["continuation"] = self.continuation
        return doc

    def to_dict(self) -> dict:
        return self.canonical()

    @classmethod
    def from_dict(cls, doc: dict) -> InferenceRequest:
        params = SamplingParams(**doc.get("params", {}))
        return cls(
            kind=doc["kind"],
            model_name=doc["model_name"],
            prompt=doc.get("prompt"),
            context=doc.get("context"),
            continuation=doc.get("continuation"),
            params=params,
        )


def cache_key(request: InferenceRequest) -> str:
    """SHA-256 over the canonical serialization of the request content.

    Covers kind, prompt or context/continuation, sampling params, and
    model_name; auth tokens and backend routing never enter the key.
    """
    return sha256_hex(canonical_dumps(request.canonical()))


@dataclass
class InferenceResponse:
    text: str
    finish_reason: str  # "stop", "length", or "error"
    token_logprobs: list[tuple[str, float | None]] | None = None
    usage: dict = field(default_factory=lambda: {"prompt_tokens": 0, "completion_tokens": 0})
    backend_id: str = ""
    cached: bool = False
    latency: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        doc: dict = {
            "text": self.text,
            "finish_reason": self.finish_reason,
            "usage": dict(self.usage),
            "backend_id": self.backend_id,
            "cached": self.cached,
            "latency": self.latency,
        }
        if self.token_logprobs is not None:
            doc["token_logprobs"] = [[t, lp] for t, lp in self.token_logprobs]
        if self.error is not None:
            doc["error"] = self.error
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> InferenceResponse:
        token_logprobs = None
        if "token_logprobs" in doc:
            token_logprobs = [(t, lp) for t, lp in doc["token_logprobs"]]
        return cls(
            text=doc["text"],
            finish_reason=doc["finish_reason"],
            token_logprobs=token_logprobs,
            usage=dict(doc.get("usage", {})),
            backend_id=doc.get("backend_id", ""),
            cached=doc.get("cached", False),
            latency=doc.get("latency", 0.0),
            error=doc.get("error"),
        )
