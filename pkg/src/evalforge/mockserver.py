"""Deterministic in-repo HTTP backend for tests and benchmarks.

Serves the same OpenAI-style completions/chat wire protocol the gateway
speaks. Behavior is driven by an ordered rule list: the first rule whose
``match`` substring (or ``match_sha256`` full-prompt hash) hits the incoming
prompt wins. Rules can script response text, continuation token logprobs,
latency, and a number of HTTP 500s to emit before succeeding. Every request
is recorded with its arrival timestamp and the number of requests in flight
at that moment, so tests can assert concurrency bounds and call counts.

Unscripted echo+logprobs requests get synthetic per-token values
-(token_index + 1) / 10 with the first token unscored, so downstream
statistics see nonuniform, order-sensitive numbers. Tokenization is
whitespace-based; fidelity to any real tokenizer is a non-goal.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


@dataclass
class MockRule:
    match: str | None = None
    match_sha256: str | None = None
    kind: str | None = None  # restrict to "generate" or "score" requests
    response_text: str = ""
    token_logprobs: list[float] | None = None
    latency: float = 0.0
    fail_times: int = 0

    def matches(self, prompt: str, request_kind: str) -> bool:
        if self.kind is not None and self.kind != request_kind:
            return False
        if self.match_sha256 is not None:
            return hashlib.sha256(prompt.encode("utf-8")).hexdigest() == self.match_sha256
        if self.match is not None:
            return self.match in prompt
        return False


@dataclass
class MockScript:
    rules: list[MockRule] = field(default_factory=list)
    default_response: str = "ok"

    @classmethod
    def from_dict(cls, doc: dict) -> "MockScript":
        rules = [MockRule(**rule) for rule in doc.get("rules", [])]
        return cls(rules=rules, default_response=doc.get("default_response", "ok"))

    @classmethod
    def from_file(cls, path) -> "MockScript":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _tokenize(text: str) -> list[tuple[str, int]]:
    """Whitespace tokens with their character offsets."""
    return [(m.group(0), m.start()) for m in re.finditer(r"\S+", text)]


class MockBackendServer:
    """Scripted HTTP backend; start() binds and serves on a daemon thread."""

    def __init__(self, script: MockScript, port: int = 0, host: str = "127.0.0.1"):
        self.script = script
        self.host = host
        self._requested_port = port
        self.request_log: list[dict] = []
        self._log_lock = threading.Lock()
        self._inflight = 0
        self._inflight_lock = threading.Lock()
        self._fail_counts = [rule.fail_times for rule in script.rules]
        self._fail_lock = threading.Lock()
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle ------------------------------------------------------

    def start(self) -> "MockBackendServer":
        handler = self._make_handler()
        self._httpd = ThreadingHTTPServer((self.host, self._requested_port), handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def __enter__(self) -> "MockBackendServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def port(self) -> int:
        assert self._httpd is not None, "server not started"
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    # -- assertions helpers ----------------------------------------------

    def logged_requests(self) -> list[dict]:
        with self._log_lock:
            return list(self.request_log)

    def request_count(self) -> int:
        with self._log_lock:
            return len(self.request_log)

    def max_concurrency(self) -> int:
        with self._log_lock:
            return max((e["concurrent"] for e in self.request_log), default=0)

    def clear_log(self) -> None:
        with self._log_lock:
            self.request_log.clear()

    def reset_failures(self) -> None:
        with self._fail_lock:
            self._fail_counts = [rule.fail_times for rule in self.script.rules]

    # -- request handling -------------------------------------------------

    def _record(self, path: str, body: dict, headers: dict) -> None:
        with self._inflight_lock:
            concurrent = self._inflight
        entry = {
            "path": path,
            "body": body,
            "timestamp": time.time(),
            "concurrent": concurrent,
            "authorization": headers.get("Authorization"),
        }
        with self._log_lock:
            self.request_log.append(entry)

    def _pick_rule(self, prompt: str, request_kind: str) -> tuple[int, MockRule] | None:
        for i, rule in enumerate(self.script.rules):
            if rule.matches(prompt, request_kind):
                return i, rule
        return None

    def _should_fail(self, rule_index: int) -> bool:
        with self._fail_lock:
            if self._fail_counts[rule_index] > 0:
                self._fail_counts[rule_index] -= 1
                return True
        return False

    def _completions_payload(self, body: dict) -> tuple[int, dict]:
        prompt = body.get("prompt", "")
        echo = bool(body.get("echo"))
        want_logprobs = body.get("logprobs") is not None
        request_kind = "score" if (echo and want_logprobs) else "generate"
        hit = self._pick_rule(prompt, request_kind)
        scripted_text = self.script.default_response
        scripted_lps: list[float] | None = None
        if hit is not None:
            idx, rule = hit
            scripted_text = rule.response_text or self.script.default_response
            scripted_lps = rule.token_logprobs
            if rule.latency > 0:
                time.sleep(rule.latency)
            if self._should_fail(idx):
                return 500, {"error": {"message": "scripted failure"}}

        tokens = _tokenize(prompt)
        if request_kind == "score":
            lps: list[float | None] = []
            for i in range(len(tokens)):
                lps.append(None if i == 0 else -(i + 1) / 10)
            if scripted_lps:
                n = min(len(scripted_lps), len(tokens))
                lps[len(tokens) - n :] = list(scripted_lps[-n:])
            logprobs_doc = {
                "tokens": [t for t, _ in tokens],
                "token_logprobs": lps,
                "text_offset": [off for _, off in tokens],
            }
            return 200, {
                "choices": [
                    {
                        "text": prompt,
                        "finish_reason": "stop",
                        "logprobs": logprobs_doc,
                    }
                ],
                "usage": {"prompt_tokens": len(tokens), "completion_tokens": 0},
            }

        text = scripted_text.replace("{prompt}", prompt)
        out_tokens = _tokenize(text)
        choice: dict = {"text": text, "finish_reason": "stop"}
        if want_logprobs:
            choice["logprobs"] = {
                "tokens": [t for t, _ in out_tokens],
                "token_logprobs": [-(i + 1) / 10 for i in range(len(out_tokens))],
                "text_offset": [off for _, off in out_tokens],
            }
        return 200, {
            "choices": [choice],
            "usage": {
                "prompt_tokens": len(tokens),
                "completion_tokens": len(out_tokens),
            },
        }

    def _chat_payload(self, body: dict) -> tuple[int, dict]:
        messages = body.get("messages", [])
        prompt = "\n".join(str(m.get("content", "")) for m in messages)
        hit = self._pick_rule(prompt, "generate")
        text = self.script.default_response
        if hit is not None:
            idx, rule = hit
            text = rule.response_text or self.script.default_response
            if rule.latency > 0:
                time.sleep(rule.latency)
            if self._should_fail(idx):
                return 500, {"error": {"message": "scripted failure"}}
        text = text.replace("{prompt}", prompt)
        return 200, {
            "choices": [
                {"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}
            ],
            "usage": {
                "prompt_tokens": len(_tokenize(prompt)),
                "completion_tokens": len(_tokenize(text)),
            },
        }

    def _make_handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def do_POST(self) -> None:  # noqa: N802 (http.server API)
                with server._inflight_lock:
                    server._inflight += 1
                try:
                    length = int(self.headers.get("Content-Length", 0))
                    raw = self.rfile.read(length)
                    try:
                        body = json.loads(raw) if raw else {}
                    except json.JSONDecodeError:
                        self._reply(400, {"error": {"message": "bad JSON"}})
                        return
                    server._record(self.path, body, dict(self.headers))
                    if self.path == "/v1/completions":
                        status, payload = server._completions_payload(body)
                    elif self.path == "/v1/chat/completions":
                        status, payload = server._chat_payload(body)
                    else:
                        status, payload = 404, {"error": {"message": "unknown endpoint"}}
                    self._reply(status, payload)
                finally:
                    with server._inflight_lock:
                        server._inflight -= 1

            def _reply(self, status: int, payload: dict) -> None:
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args) -> None:
                pass

        return Handler


def serve(script: MockScript, port: int = 0, host: str = "127.0.0.1") -> MockBackendServer:
    """Start a mock backend; returns the running server handle."""
    return MockBackendServer(script, port=port, host=host).start()


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Run a scripted mock inference backend")
    parser.add_argument("script", help="JSON script file (rules + default_response)")
    parser.add_argument("--port", type=int, default=8800)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)
    server = serve(MockScript.from_file(args.script), port=args.port, host=args.host)
    print(f"mock backend serving on {server.base_url}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
