"""Exception hierarchy shared across the package."""

from __future__ import annotations


class EvalForgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EvalForgeError):
    """Invalid pipeline config: syntax, schema, or unknown step kind."""


class DatasetError(EvalForgeError):
    """Malformed dataset file or record."""


class TemplateError(EvalForgeError):
    """Prompt template fails validation or cannot be resolved."""


class ContextKeyError(EvalForgeError):
    """Second write to a write-once context key, or read of a missing key."""


class RegistryError(EvalForgeError):
    """Duplicate step-kind registration or lookup of an unknown kind."""


class StepFailure(EvalForgeError):
    """A pipeline step failed; carries the step index and phase."""

    def __init__(self, step_index: int, phase: str, message: str):
        super().__init__(f"step {step_index} failed in {phase}: {message}")
        self.step_index = step_index
        self.phase = phase


class GatewayError(EvalForgeError):
    """Gateway-level failure (no usable backend, whole batch errored)."""


class CapabilityError(GatewayError):
    """Backend cannot serve the requested kind of inference."""


class BackendUnreachableError(GatewayError):
    """No TCP connection could be established to a configured backend."""


class AnnotationError(EvalForgeError):
    """Annotation API misuse: unknown task, double submit, bad label."""
