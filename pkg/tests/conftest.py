from __future__ import annotations

from pathlib import Path

import pytest

from evalforge.gateway.types import BackendConfig
from evalforge.mockserver import MockBackendServer, MockScript

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def mock_server():
    """Factory starting mock backends that are torn down at test end."""
    servers: list[MockBackendServer] = []

    def start(script: MockScript) -> MockBackendServer:
        server = MockBackendServer(script).start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()


def backend_for(server: MockBackendServer, model_name: str = "mock-model", **kwargs) -> BackendConfig:
    return BackendConfig(
        backend_id=kwargs.pop("backend_id", "b0"),
        base_url=server.base_url,
        api_kind=kwargs.pop("api_kind", "completions"),
        model_name=model_name,
        **kwargs,
    )


class FakeClock:
    """Manually advanced clock for limiter simulations."""

    def __init__(self, start: float = 0.0):
        self.now = start

    def advance(self, seconds: float) -> None:
        self.now += seconds

    def __call__(self) -> float:
        return self.now
