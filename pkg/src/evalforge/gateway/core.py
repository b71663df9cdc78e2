"""Concurrent request dispatch with caching, balancing, and rate limiting.

``submit_batch`` is the single entry point steps use. The flow per request:
consult the cache, pick the least-loaded backend for the model, wait for a
rate-limit permit, send, retry transient failures with exponential backoff,
and store the success back in the cache. A fixed worker pool bounds the number
of requests in flight; identical requests inside one batch collapse to a
single network call whose response is fanned out. Responses come back in
input order no matter the completion order.
"""

from __future__ import annotations

import logging
import random
import socket
import threading
import time
import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import requests

from ..errors import BackendUnreachableError, CapabilityError, GatewayError
from .balancer import LoadTracker
from .cache import ResponseCache
from .client import PermanentBackendError, TransientBackendError, send_request
from .ratelimit import RateLimiter
from .types import BackendConfig, InferenceRequest, InferenceResponse, cache_key

logger = logging.getLogger(__name__)


@dataclass
class RetryPolicy:
    """Transient failures retry with 1 s * 2^attempt backoff, +/-20% jitter.

    Generation requests with temperature > 0 are re-sampled on retry; the
    first success is cached, which pins the result for later runs.
    """

    attempts: int = 3
    backoff_base: float = 1.0
    jitter: float = 0.2

    def backoff(self, attempt: int) -> float:
        base = self.backoff_base * (2**attempt)
        return base * (1 + random.uniform(-self.jitter, self.jitter))


@dataclass
class GatewayStats:
    cache_hits: int = 0
    cache_misses: int = 0
    network_calls: int = 0
    deduped: int = 0
    retries: int = 0
    errors: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, name: str, delta: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + delta)


class InferenceGateway:
    """Shared dispatcher over one or more HTTP backends."""

    def __init__(
        self,
        backends: list[BackendConfig],
        workers: int = 8,
        cache_dir: str | None = None,
        retry: RetryPolicy | None = None,
    ):
        if workers < 1:
            raise GatewayError("workers must be >= 1")
        for backend in backends:
            backend.validate()
        self.backends = list(backends)
        self.workers = workers
        self.cache = ResponseCache(cache_dir) if cache_dir else None
        self.retry = retry or RetryPolicy()
        self.stats = GatewayStats()
        self._tracker = LoadTracker(backends)
        self._limiters = {
            b.backend_id: RateLimiter(b.max_requests_per_minute) for b in backends
        }
        self._local = threading.local()

    # -- capability / reachability -------------------------------------

    def has_model(self, model_name: str) -> bool:
        return self._tracker.has_model(model_name)

    def check_score_capable(self, model_name: str) -> None:
        if not self._tracker.has_model(model_name):
            raise GatewayError(f"no backend serves model {model_name!r}")
        if not self._tracker.score_capable(model_name):
            raise CapabilityError(
                f"no backend serving {model_name!r} supports score requests "
                "(completions API with echo + logprobs required)"
            )

    def probe_reachable(self, connect_timeout: float = 5.0) -> None:
        """TCP-connect to every backend; raises when any is unreachable."""
        for backend in self.backends:
            parsed = urllib.parse.urlparse(backend.base_url)
            host = parsed.hostname or ""
            port = parsed.port or (443 if parsed.scheme == "https" else 80)
            try:
                with socket.create_connection((host, port), timeout=connect_timeout):
                    pass
            except OSError as exc:
                raise BackendUnreachableError(
                    f"backend {backend.backend_id!r} unreachable at {host}:{port}: {exc}"
                ) from exc

    def completed_counts(self) -> dict[str, int]:
        return self._tracker.completed_counts()

    # -- dispatch -------------------------------------------------------

    def submit_batch(
        self, requests_list: list[InferenceRequest], workers: int | None = None
    ) -> list[InferenceResponse]:
        """Dispatch a batch and return responses in input order.

        At most ``workers`` requests are in flight at once. Raises
        ``GatewayError`` only when every request in a non-empty batch errors.
        """
        if not requests_list:
            return []
        workers = workers or self.workers
        for req in requests_list:
            req.validate()
            if not self.has_model(req.model_name):
                raise GatewayError(f"no backend serves model {req.model_name!r}")

        # Collapse identical requests: first index with a given key leads,
        # the rest reuse its response.
        leaders: dict[str, int] = {}
        order: list[str] = []
        for i, req in enumerate(requests_list):
            key = cache_key(req)
            order.append(key)
            if key not in leaders:
                leaders[key] = i
            else:
                self.stats.bump("deduped")

        unique = [(key, requests_list[i]) for key, i in leaders.items()]
        results: dict[str, InferenceResponse] = {}
        if len(unique) == 1:
            key, req = unique[0]
            results[key] = self._execute(req)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for key, resp in zip(
                    [k for k, _ in unique],
                    pool.map(self._execute, [r for _, r in unique]),
                ):
                    results[key] = resp

        responses: list[InferenceResponse] = []
        for i, key in enumerate(order):
            resp = results[key]
            if leaders[key] != i:
                # fan-out copy: served without a network call of its own
                resp = replace(resp, cached=True)
            responses.append(resp)
        if all(r.finish_reason == "error" for r in responses):
            raise GatewayError(
                f"all {len(responses)} requests in the batch failed; "
                f"first error: {responses[0].error}"
            )
        return responses

    def submit(self, request: InferenceRequest) -> InferenceResponse:
        return self.submit_batch([request])[0]

    # -- internals ------------------------------------------------------

    def _session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _execute(self, request: InferenceRequest) -> InferenceResponse:
        key = cache_key(request)
        if self.cache is not None:
            entry = self.cache.lookup(key)
            if entry is not None:
                self.stats.bump("cache_hits")
                hit = entry.response
                hit.cached = True
                hit.latency = 0.0
                return hit
            self.stats.bump("cache_misses")

        last_error = ""
        for attempt in range(self.retry.attempts):
            backend = self._tracker.checkout(request.model_name)
            try:
                self._limiters[backend.backend_id].acquire()
                self.stats.bump("network_calls")
                response = send_request(self._session(), backend, request)
            except TransientBackendError as exc:
                last_error = str(exc)
                self._tracker.release(backend.backend_id)
                if attempt + 1 < self.retry.attempts:
                    self.stats.bump("retries")
                    time.sleep(self.retry.backoff(attempt))
                continue
            except (PermanentBackendError, CapabilityError) as exc:
                self._tracker.release(backend.backend_id)
                self.stats.bump("errors")
                return InferenceResponse(
                    text="", finish_reason="error", backend_id=backend.backend_id,
                    error=str(exc),
                )
            else:
                self._tracker.release(backend.backend_id)
                if self.cache is not None and response.finish_reason != "error":
                    self.cache.store(request, response)
                return response
        self.stats.bump("errors")
        logger.warning("request failed after %d attempts: %s", self.retry.attempts, last_error)
        return InferenceResponse(text="", finish_reason="error", error=last_error)
