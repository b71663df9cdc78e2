"""Step-kind registry: maps config kind strings to step classes."""

from __future__ import annotations

from .errors import RegistryError


class StepRegistry:
    def __init__(self):
        self._kinds: dict[str, type] = {}

    def register(self, kind: str, step_cls: type) -> None:
        if kind in self._kinds:
            raise RegistryError(f"step kind {kind!r} already registered")
        self._kinds[kind] = step_cls

    def resolve(self, kind: str) -> type:
        if kind not in self._kinds:
            raise RegistryError(
                f"unknown step kind {kind!r}; registered kinds: {', '.join(self.kinds())}"
            )
        return self._kinds[kind]

    def kinds(self) -> list[str]:
        return sorted(self._kinds)


def default_registry() -> StepRegistry:
    """Registry with all built-in step kinds registered."""
    from . import steps

    registry = StepRegistry()
    steps.register_builtin_steps(registry)
    return registry
