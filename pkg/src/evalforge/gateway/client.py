"""HTTP client speaking the OpenAI-style completions/chat wire protocol.

Generate requests go to ``POST {base}/v1/completions`` or
``/v1/chat/completions`` depending on the backend's api_kind. Score requests
always use the completions endpoint with echo + logprobs and ``max_tokens=0``;
the continuation's token logprobs are recovered from the returned
``text_offset`` array (tokens whose offset falls at or beyond the context
length). CP templates end their context with whitespace so the boundary is
always a token boundary under any reasonable tokenizer.
"""

from __future__ import annotations

import time

import requests

from ..errors import CapabilityError
from .types import BackendConfig, InferenceRequest, InferenceResponse


class TransientBackendError(Exception):
    """Retryable failure: connection problem, timeout, or HTTP 5xx."""


class PermanentBackendError(Exception):
    """Non-retryable failure: HTTP 4xx or a malformed response body."""


def _headers(backend: BackendConfig) -> dict:
    headers = {"Content-Type": "application/json"}
    if backend.auth_token:
        headers["Authorization"] = f"Bearer {backend.auth_token}"
    return headers


def _post(session: requests.Session, backend: BackendConfig, path: str, payload: dict) -> dict:
    url = backend.base_url.rstrip("/") + path
    try:
        resp = session.post(
            url, json=payload, headers=_headers(backend), timeout=backend.timeout
        )
    except (requests.Timeout, requests.ConnectionError) as exc:
        raise TransientBackendError(f"{backend.backend_id}: {exc}") from exc
    if resp.status_code >= 500:
        raise TransientBackendError(
            f"{backend.backend_id}: HTTP {resp.status_code}: {resp.text[:200]}"
        )
    if resp.status_code >= 400:
        raise PermanentBackendError(
            f"{backend.backend_id}: HTTP {resp.status_code}: {resp.text[:200]}"
        )
    try:
        return resp.json()
    except ValueError as exc:
        raise PermanentBackendError(f"{backend.backend_id}: non-JSON body") from exc


def send_request(
    session: requests.Session, backend: BackendConfig, request: InferenceRequest
) -> InferenceResponse:
    """Issue one network call and translate the wire response."""
    start = time.monotonic()
    if request.kind == "score":
        body = _score(session, backend, request)
    elif backend.api_kind == "chat":
        body = _chat_generate(session, backend, request)
    else:
        body = _completions_generate(session, backend, request)
    body.backend_id = backend.backend_id
    body.latency = time.monotonic() - start
    return body


def _completions_generate(
    session: requests.Session, backend: BackendConfig, request: InferenceRequest
) -> InferenceResponse:
    payload = {
        "model": backend.model_name,
        "prompt": request.prompt,
        "max_tokens": request.params.max_tokens,
        "temperature": request.params.temperature,
        "top_p": request.params.top_p,
        "stop": request.params.stop or None,
        "logprobs": 1 if request.params.logprobs else None,
        "echo": request.params.echo,
    }
    doc = _post(session, backend, "/v1/completions", payload)
    choice = _first_choice(doc)
    token_logprobs = None
    if request.params.logprobs and choice.get("logprobs"):
        lp = choice["logprobs"]
        token_logprobs = list(zip(lp.get("tokens", []), lp.get("token_logprobs", [])))
    return InferenceResponse(
        text=choice.get("text", ""),
        finish_reason=choice.get("finish_reason", "stop"),
        token_logprobs=token_logprobs,
        usage=_usage(doc),
    )


def _chat_generate(
    session: requests.Session, backend: BackendConfig, request: InferenceRequest
) -> InferenceResponse:
    payload = {
        "model": backend.model_name,
        "messages": [{"role": "user", "content": request.prompt}],
        "max_tokens": request.params.max_tokens,
        "temperature": request.params.temperature,
        "top_p": request.params.top_p,
        "stop": request.params.stop or None,
    }
    doc = _post(session, backend, "/v1/chat/completions", payload)
    choice = _first_choice(doc)
    message = choice.get("message", {})
    return InferenceResponse(
        text=message.get("content", ""),
        finish_reason=choice.get("finish_reason", "stop"),
        usage=_usage(doc),
    )


def _score(
    session: requests.Session, backend: BackendConfig, request: InferenceRequest
) -> InferenceResponse:
    if not backend.supports_score():
        raise CapabilityError(
            f"backend {backend.backend_id!r} ({backend.api_kind}) cannot serve "
            "score requests (needs completions echo + logprobs)"
        )
    context = request.context or ""
    full_text = context + (request.continuation or "")
    payload = {
        "model": backend.model_name,
        "prompt": full_text,
        "max_tokens": 0,
        "temperature": 0.0,
        "top_p": 1.0,
        "stop": None,
        "logprobs": 1,
        "echo": True,
    }
    doc = _post(session, backend, "/v1/completions", payload)
    choice = _first_choice(doc)
    lp = choice.get("logprobs") or {}
    tokens = lp.get("tokens", [])
    logprobs = lp.get("token_logprobs", [])
    offsets = lp.get("text_offset", [])
    if len(tokens) != len(logprobs) or len(tokens) != len(offsets):
        raise PermanentBackendError(
            f"{backend.backend_id}: logprob arrays have mismatched lengths"
        )
    continuation_lps = [
        (tok, logprob)
        for tok, logprob, off in zip(tokens, logprobs, offsets)
        if off >= len(context)
    ]
    return InferenceResponse(
        text=choice.get("text", full_text),
        finish_reason=choice.get("finish_reason", "stop"),
        token_logprobs=continuation_lps,
        usage=_usage(doc),
    )


def _first_choice(doc: dict) -> dict:
    choices = doc.get("choices")
    if not choices:
        raise PermanentBackendError("response has no choices")
    return choices[0]


def _usage(doc: dict) -> dict:
    usage = doc.get("usage", {})
    return {
        "prompt_tokens": int(usage.get("prompt_tokens", 0)),
        "completion_tokens": int(usage.get("completion_tokens", 0)),
    }
