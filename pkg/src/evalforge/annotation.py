"""Human-preference annotation service: task queue, REST API, journal.

Tasks come from a JSONL file (``pair_id``, ``question``, ``response_a``,
``response_b``, optional ``mode``). The server blinds identities and
randomizes slot order per (task, annotator) under the session seed; the
randomization is deterministic, so submitted slot labels can always be
de-randomized back to response identities. Submissions append to a JSONL
journal, which makes the store auditable and lets a restarted server pick up
where it left off. Assignment is atomic: while a task is pending it belongs
to at most one annotator.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import AnnotationError
from .jsonutil import canonical_dumps
from .metaeval import PreferenceRecord
from .seeding import derive_subseed

SLOT_LABELS = ("A", "B", "tie")


@dataclass
class AnnotationTask:
    task_id: str
    question: str
    response_a: str
    response_b: str
    mode: str = "pairwise"
    status: str = "pending"
    assigned_to: str | None = None
    swapped: bool = False  # slot order shown to the assigned annotator

    def payload(self, done: int, total: int) -> dict:
        slot_1, slot_2 = (
            (self.response_b, self.response_a)
            if self.swapped
            else (self.response_a, self.response_b)
        )
        doc = {
            "task_id": self.task_id,
            "question": self.question,
            "mode": self.mode,
            "progress": {"done": done, "total": total},
        }
        if self.mode == "pairwise":
            doc["slot_1"] = slot_1
            doc["slot_2"] = slot_2
        else:
            doc["response"] = self.response_a
            doc["scale"] = {"min": 1, "max": 10}
        return doc


def load_tasks(path: str | Path) -> list[AnnotationTask]:
    tasks = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"tasks line {line_no}: invalid JSON: {exc.msg}") from exc
            task_id = doc.get("task_id") or doc.get("pair_id") or f"task-{line_no}"
            if task_id in seen:
                raise AnnotationError(f"tasks line {line_no}: duplicate task id {task_id!r}")
            seen.add(task_id)
            mode = doc.get("mode", "pairwise")
            if mode == "pairwise" and ("response_a" not in doc or "response_b" not in doc):
                raise AnnotationError(f"tasks line {line_no}: pairwise task needs both responses")
            tasks.append(
                AnnotationTask(
                    task_id=task_id,
                    question=doc.get("question", ""),
                    response_a=doc.get("response_a", doc.get("response", "")),
                    response_b=doc.get("response_b", ""),
                    mode=mode,
                )
            )
    return tasks


def derandomize_label(slot_label: str, swapped: bool) -> str:
    """Map a slot-based label back to response identity."""
    if slot_label == "tie" or not swapped:
        return slot_label
    return "B" if slot_label == "A" else "A"


class AnnotationStore:
    """In-memory task state backed by an append-only submission journal."""

    def __init__(self, tasks: list[AnnotationTask], seed: int, journal_path: str | Path):
        self.tasks = list(tasks)
        self.by_id = {t.task_id: t for t in self.tasks}
        if len(self.by_id) != len(self.tasks):
            raise AnnotationError("duplicate task ids")
        self.seed = seed
        self.journal_path = Path(journal_path)
        self.records: list[PreferenceRecord] = []
        self._lock = threading.Lock()
        if self.journal_path.exists():
            self._replay_journal()

    def _replay_journal(self) -> None:
        with open(self.journal_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                task = self.by_id.get(doc["task_id"])
                if task is None:
                    continue
                task.status = "done"
                task.assigned_to = doc["annotator_id"]
                task.swapped = doc["swapped"]
                self.records.append(PreferenceRecord.from_dict(doc["record"]))

    def _randomize(self, task: AnnotationTask, annotator_id: str) -> bool:
        return bool(derive_subseed(self.seed, f"{task.task_id}:{annotator_id}") & 1)

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        """Oldest unassigned pending task; polling again returns the caller's
        own in-flight task rather than assigning a second one."""
        if not annotator_id:
            raise AnnotationError("annotator id is required")
        with self._lock:
            for task in self.tasks:
                if task.status == "pending" and task.assigned_to == annotator_id:
                    return task
            for task in self.tasks:
                if task.status == "pending" and task.assigned_to is None:
                    task.assigned_to = annotator_id
                    task.swapped = task.mode == "pairwise" and self._randomize(
                        task, annotator_id
                    )
                    return task
        return None

    def submit(
        self,
        task_id: str,
        annotator_id: str,
        label: str | None = None,
        score: float | None = None,
        elapsed: float = 0.0,
    ) -> PreferenceRecord:
        with self._lock:
            task = self.by_id.get(task_id)
            if task is None:
                raise AnnotationError(f"unknown task {task_id!r}")
            if task.status == "done":
                raise AnnotationError(f"task {task_id!r} already submitted")
            if task.assigned_to != annotator_id:
                raise AnnotationError(f"task {task_id!r} is not assigned to {annotator_id!r}")
            if task.mode == "pairwise":
                if label not in SLOT_LABELS:
                    raise AnnotationError(
                        f"pairwise submission needs a label in {SLOT_LABELS}"
                    )
                true_label = derandomize_label(label, task.swapped)
            else:
                if score is None:
                    raise AnnotationError("direct submission needs a score")
                if not 1 <= score <= 10:
                    raise AnnotationError("score must be between 1 and 10")
                true_label = None
            record = PreferenceRecord(
                pair_id=task.task_id,
                question=task.question,
                response_a=task.response_a,
                response_b=task.response_b,
                human_label=true_label,
                annotator_id=annotator_id,
                elapsed=elapsed,
                mode=task.mode,
                score=score if task.mode == "direct" else None,
            )
            record.validate()
            task.status = "done"
            self.records.append(record)
            entry = {
                "task_id": task.task_id,
                "annotator_id": annotator_id,
                "slot_label": label,
                "swapped": task.swapped,
                "record": record.to_dict(),
            }
            self.journal_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.journal_path, "a", encoding="utf-8") as fh:
                fh.write(canonical_dumps(entry) + "\n")
            return record

    def export_jsonl(self) -> str:
        with self._lock:
            return "".join(canonical_dumps(r.to_dict()) + "\n" for r in self.records)

    def progress(self) -> dict:
        with self._lock:
            done = sum(t.status == "done" for t in self.tasks)
            assigned = sum(
                t.status == "pending" and t.assigned_to is not None for t in self.tasks
            )
            return {
                "total": len(self.tasks),
                "done": done,
                "assigned": assigned,
                "pending": len(self.tasks) - done,
            }


_SUBMIT_RE = re.compile(r"^/api/tasks/([^/]+)/submit$")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
}


class AnnotationServer:
    """HTTP front to an AnnotationStore, optionally serving the static UI."""

    def __init__(
        self,
        store: AnnotationStore,
        port: int = 0,
        host: str = "127.0.0.1",
        ui_dir: str | Path | None = None,
    ):
        self.store = store
        self.host = host
        self._requested_port = port
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    def start(self) -> "AnnotationServer":
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

    def __enter__(self) -> "AnnotationServer":
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

    def serve_forever(self) -> None:
        assert self._thread is not None
        self._thread.join()

    def _make_handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def do_GET(self) -> None:  # noqa: N802
                parsed = urlparse(self.path)
                if parsed.path == "/api/tasks/next":
                    query = parse_qs(parsed.query)
                    annotator = query.get("annotator", [""])[0]
                    try:
                        task = server.store.next_task(annotator)
                    except AnnotationError as exc:
                        self._json(400, {"error": str(exc)})
                        return
                    progress = server.store.progress()
                    if task is None:
                        self._json(200, {"task": None, "progress": progress})
                    else:
                        self._json(
                            200,
                            {"task": task.payload(progress["done"], progress["total"])},
                        )
                elif parsed.path == "/api/export":
                    query = parse_qs(parsed.query)
                    fmt = query.get("format", ["jsonl"])[0]
                    if fmt != "jsonl":
                        self._json(400, {"error": f"unsupported format {fmt!r}"})
                        return
                    data = server.store.export_jsonl().encode("utf-8")
                    self.send_response(200)
                    self.send_header("Content-Type", "application/x-ndjson")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                elif parsed.path == "/api/progress":
                    self._json(200, server.store.progress())
                else:
                    self._static(parsed.path)

            def do_POST(self) -> None:  # noqa: N802
                m = _SUBMIT_RE.match(urlparse(self.path).path)
                if not m:
                    self._json(404, {"error": "unknown endpoint"})
                    return
                task_id = m.group(1)
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._json(400, {"error": "invalid JSON body"})
                    return
                try:
                    record = server.store.submit(
                        task_id=task_id,
                        annotator_id=body.get("annotator", ""),
                        label=body.get("label"),
                        score=body.get("score"),
                        elapsed=float(body.get("elapsed", 0.0)),
                    )
                except AnnotationError as exc:
                    status = 409 if "already submitted" in str(exc) else 400
                    self._json(status, {"error": str(exc)})
                    return
                self._json(200, {"ok": True, "pair_id": record.pair_id})

            def _static(self, path: str) -> None:
                if server.ui_dir is None:
                    self._json(404, {"error": "no UI bundled; API only"})
                    return
                rel = path.lstrip("/") or "index.html"
                target = (server.ui_dir / rel).resolve()
                if not str(target).startswith(str(server.ui_dir.resolve())) or not target.is_file():
                    self._json(404, {"error": "not found"})
                    return
                data = target.read_bytes()
                self.send_response(200)
                ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def _json(self, status: int, payload: dict) -> None:
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args) -> None:
                pass

        return Handler
