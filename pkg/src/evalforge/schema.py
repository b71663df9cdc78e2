"""Tiny declarative validator for step params.

A schema is a dict mapping field name to a ``Field``. Validation fills
defaults, rejects unknown fields, and names the offending field in every
error message.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import ConfigError

_TYPES = {
    "str": str,
    "int": int,
    "float": (int, float),
    "bool": bool,
    "list": list,
    "map": dict,
}


@dataclass
class Field:
    type: str
    required: bool = False
    default: Any = None
    choices: tuple | None = None
    min: float | None = None
    max: float | None = None


def validate_params(kind: str, schema: dict[str, Field], params: dict) -> dict:
    """Return a new params dict with defaults applied, or raise ConfigError."""
    if not isinstance(params, dict):
        raise ConfigError(f"step {kind!r}: params must be an object")
    out: dict[str, Any] = {}
    for name in params:
        if name not in schema:
            raise ConfigError(f"step {kind!r}: unknown param {name!r}")
    for name, spec in schema.items():
        if name not in params:
            if spec.required:
                raise ConfigError(f"step {kind!r}: missing required param {name!r}")
            out[name] = spec.default
            continue
        value = params[name]
        if value is None:
            # explicit null: fall back to the default (round-trip friendly)
            if spec.required:
                raise ConfigError(f"step {kind!r}: missing required param {name!r}")
            out[name] = spec.default
            continue
        expected = _TYPES[spec.type]
        if isinstance(value, bool) and spec.type in ("int", "float"):
            raise ConfigError(f"step {kind!r}: param {name!r} must be a number")
        if not isinstance(value, expected):
            raise ConfigError(
                f"step {kind!r}: param {name!r} must be of type {spec.type}"
            )
        if spec.choices is not None and value not in spec.choices:
            raise ConfigError(
                f"step {kind!r}: param {name!r} must be one of {list(spec.choices)}"
            )
        if spec.min is not None and value < spec.min:
            raise ConfigError(f"step {kind!r}: param {name!r} must be >= {spec.min}")
        if spec.max is not None and value > spec.max:
            raise ConfigError(f"step {kind!r}: param {name!r} must be <= {spec.max}")
        out[name] = value
    return out
