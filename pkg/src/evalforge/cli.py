"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 step failure, 4 backend unreachable.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import parse_config, serialize_config
from .errors import (
    AnnotationError,
    BackendUnreachableError,
    ConfigError,
    EvalForgeError,
    StepFailure,
)
from .pipeline import MANIFEST_NAME, build_gateway, run_pipeline
from .registry import default_registry

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STEP = 3
EXIT_UNREACHABLE = 4

logger = logging.getLogger(__name__)


def _load_config(path: str, args: argparse.Namespace):
    registry = default_registry()
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    config = parse_config(raw, registry)
    if getattr(args, "output_dir", None):
        config.output_dir = args.output_dir
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "workers", None):
        config.workers = args.workers
    if getattr(args, "cache_dir", None):
        config.cache_dir = args.cache_dir
    overrides = getattr(args, "backend", None) or []
    for i, override in enumerate(overrides):
        # "--backend URL" overrides the i-th backend's base_url in order;
        # "--backend id=URL" targets a backend by id.
        if "=" in override and not override.split("=", 1)[0].startswith("http"):
            backend_id, url = override.split("=", 1)
            matched = [b for b in config.backends if b.backend_id == backend_id]
            if not matched:
                raise ConfigError(f"--backend: no backend with id {backend_id!r}")
            matched[0].base_url = url
            matched[0].validate()
        else:
            if i >= len(config.backends):
                raise ConfigError("--backend: more overrides than configured backends")
            config.backends[i].base_url = override
            config.backends[i].validate()
    return config, registry


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config, registry = _load_config(args.config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    gateway = build_gateway(config)
    try:
        gateway.probe_reachable()
    except BackendUnreachableError as exc:
        print(f"backend unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    try:
        ctx = run_pipeline(config, registry, gateway)
    except StepFailure as exc:
        print(f"pipeline aborted: {exc}", file=sys.stderr)
        print(f"partial artifacts remain in {config.output_dir}", file=sys.stderr)
        return EXIT_STEP
    print(f"pipeline {config.pipeline_id!r} finished: {len(config.steps)} steps")
    print(f"context keys: {', '.join(ctx.keys())}")
    print(f"artifacts in {config.output_dir} (see {MANIFEST_NAME})")
    stats = gateway.stats
    print(
        f"gateway: {stats.network_calls} network calls, {stats.cache_hits} cache hits, "
        f"{stats.deduped} deduped, {stats.retries} retries"
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        config, _ = _load_config(args.config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"OK: pipeline {config.pipeline_id!r}")
    print(f"  steps: {', '.join(s.kind for s in config.steps)}")
    print(f"  backends: {', '.join(b.backend_id for b in config.backends) or '(none)'}")
    if args.print_canonical:
        print(serialize_config(config), end="")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        print(f"no {MANIFEST_NAME} in {run_dir}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = json.loads(manifest_path.read_text("utf-8"))
    print(f"pipeline: {manifest['pipeline_id']}")
    events = manifest.get("events", [])
    failed = [e for e in events if e["status"] == "failed"]
    steps_done = {e["step_index"] for e in events if e["status"] == "finished"}
    print(f"steps with finished phases: {len(steps_done)}; failed events: {len(failed)}")
    for event in failed:
        print(f"  step {event['step_index']} {event['phase']}: {event.get('error')}")
    metrics_dir = run_dir / "metrics"
    if metrics_dir.is_dir():
        for path in sorted(metrics_dir.glob("*.json")):
            doc = json.loads(path.read_text("utf-8"))
            print(f"\n[{path.stem}]")
            if "metric_name" in doc:
                print(
                    f"  {doc['metric_name']}: {doc['overall']:.4f} "
                    f"(n={doc['n']}, unparsed_rate={doc['unparsed_rate']:.4f})"
                )
                for group, rate in sorted(doc.get("by_group", {}).items()):
                    print(f"    {group}: {rate:.4f}")
            else:
                for name, value in sorted(doc.items()):
                    print(f"  {name}: {value}")
    contamination_dir = run_dir / "contamination"
    if contamination_dir.is_dir():
        for path in sorted(contamination_dir.glob("*.json")):
            doc = json.loads(path.read_text("utf-8"))
            print(f"\n[{path.stem}] method={doc['method']}")
            for name, value in sorted(doc["aggregate"].items()):
                print(f"  {name}: {value}")
    print(f"\n{len(manifest.get('outputs', {}))} artifact files digested in the manifest")
    return EXIT_OK


def cmd_annotate(args: argparse.Namespace) -> int:
    from .annotation import AnnotationServer, AnnotationStore, load_tasks

    try:
        tasks = load_tasks(args.tasks)
    except (AnnotationError, OSError) as exc:
        print(f"cannot load tasks: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    journal = args.journal or f"{args.tasks}.journal.jsonl"
    store = AnnotationStore(tasks, seed=args.seed, journal_path=journal)
    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        if (bundled / "index.html").is_file():
            ui_dir = str(bundled)
    server = AnnotationServer(store, port=args.port, host=args.host, ui_dir=ui_dir)
    server.start()
    print(f"annotation server on {server.base_url} "
          f"({store.progress()['total']} tasks, journal {journal})")
    if ui_dir:
        print(f"serving UI from {ui_dir}")
    else:
        print("API only (no UI build found; pass --ui-dir)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evalforge",
        description="Composable LLM evaluation pipelines over remote inference backends",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a pipeline config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--cache-dir")
    p_run.add_argument(
        "--backend", action="append",
        help="override a backend base_url (positional or id=URL); repeatable",
    )
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")
    p_val.add_argument("--print-canonical", action="store_true")
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("report", help="summarize a finished run directory")
    p_rep.add_argument("run_dir")
    p_rep.set_defaults(func=cmd_report)

    p_ann = sub.add_parser("annotate", help="serve the annotation API (and UI)")
    p_ann.add_argument("--port", type=int, default=8710)
    p_ann.add_argument("--host", default="127.0.0.1")
    p_ann.add_argument("--tasks", required=True)
    p_ann.add_argument("--seed", type=int, default=0)
    p_ann.add_argument("--journal")
    p_ann.add_argument("--ui-dir")
    p_ann.set_defaults(func=cmd_annotate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except EvalForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
