"""Least-loaded endpoint selection across backends serving the same model."""

from __future__ import annotations

import threading

from ..errors import GatewayError
from .types import BackendConfig


def select_endpoint(
    backends: list[BackendConfig],
    outstanding: dict[str, int],
    model_name: str | None = None,
) -> str:
    """Pick the backend minimizing outstanding/weight; ties go to the lowest
    list index. Restricted to backends serving ``model_name`` when given."""
    candidates = [
        b for b in backends if model_name is None or b.model_name == model_name
    ]
    if not candidates:
        raise GatewayError(f"no backend serves model {model_name!r}")
    best = candidates[0]
    best_load = outstanding.get(best.backend_id, 0) / best.weight
    for backend in candidates[1:]:
        load = outstanding.get(backend.backend_id, 0) / backend.weight
        if load < best_load:
            best, best_load = backend, load
    return best.backend_id


class LoadTracker:
    """Synchronized in-flight counters feeding the balancer.

    ``checkout`` picks the least-loaded backend and increments its counter in
    one critical section; callers must ``release`` when the request settles.
    """

    def __init__(self, backends: list[BackendConfig]):
        self.backends = list(backends)
        self._by_id = {b.backend_id: b for b in backends}
        self._outstanding: dict[str, int] = {b.backend_id: 0 for b in backends}
        self._completed: dict[str, int] = {b.backend_id: 0 for b in backends}
        self._lock = threading.Lock()

    def checkout(self, model_name: str) -> BackendConfig:
        with self._lock:
            backend_id = select_endpoint(self.backends, self._outstanding, model_name)
            self._outstanding[backend_id] += 1
            return self._by_id[backend_id]

    def release(self, backend_id: str) -> None:
        with self._lock:
            self._outstanding[backend_id] -= 1
            self._completed[backend_id] += 1

    def completed_counts(self) -> dict[str, int]:
        with self._lock:
            return dict(self._completed)

    def has_model(self, model_name: str) -> bool:
        return any(b.model_name == model_name for b in self.backends)

    def score_capable(self, model_name: str) -> bool:
        return any(
            b.model_name == model_name and b.supports_score() for b in self.backends
        )
