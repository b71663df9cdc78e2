"""Inference gateway: concurrent dispatch, caching, balancing, rate limiting."""

from .balancer import LoadTracker, select_endpoint
from .cache import CacheEntry, ResponseCache
from .core import GatewayStats, InferenceGateway, RetryPolicy
from .ratelimit import RateLimiter
from .types import (
    BackendConfig,
    InferenceRequest,
    InferenceResponse,
    SamplingParams,
    cache_key,
)

__all__ = [
    "BackendConfig",
    "CacheEntry",
    "GatewayStats",
    "InferenceGateway",
    "InferenceRequest",
    "InferenceResponse",
    "LoadTracker",
    "RateLimiter",
    "ResponseCache",
    "RetryPolicy",
    "SamplingParams",
    "cache_key",
    "select_endpoint",
]
