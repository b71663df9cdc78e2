"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Every tolerance is pinned here; nothing is calibrated elsewhere.
"""

from __future__ import annotations

import contextlib
import json
import math
import random
import time
from pathlib import Path

import pytest

from evalforge.config import GatewaySettings, PipelineConfig, StepConfig
from evalforge.contamination import compute_min_k
from evalforge.errors import StepFailure
from evalforge.gateway import InferenceGateway, InferenceRequest, RetryPolicy
from evalforge.gateway.ratelimit import RateLimiter
from evalforge.metaeval import cohen_kappa
from evalforge.mockserver import MockBackendServer, MockRule, MockScript
from evalforge.pipeline import MANIFEST_NAME, build_gateway, run_pipeline
from evalforge.registry import default_registry
from evalforge.textmetrics import rouge_l
from tests.conftest import FIXTURES, FakeClock, backend_for
from tests.test_contamination import brute_force_min_k
from tests.test_metaeval import brute_force_kappa
from tests.test_pipeline import MCP_RULES
from tests.test_steps import CP_SCORE_RULES
from tests.test_textmetrics import brute_force_lcs


@contextlib.contextmanager
def criterion(name: str, detail: str = ""):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE [{name}]: FAIL")
        raise
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE [{name}]: PASS{suffix}")


def _config(server, tmp_path, steps, name="acceptance", **overrides) -> PipelineConfig:
    defaults = dict(
        pipeline_id=name,
        steps=steps,
        backends=[backend_for(server)],
        output_dir=str(tmp_path / name),
        seed=7,
        workers=8,
        cache_dir=str(tmp_path / f"{name}-cache"),
        gateway=GatewaySettings(retries=2, backoff_base=0.01),
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)


def _eval_step(dataset: Path, regime="MCP", template="PromptA", key="eval") -> StepConfig:
    return StepConfig(
        kind="dataset_eval",
        params={
            "dataset": str(dataset),
            "model": "mock-model",
            "regime": regime,
            "template": template,
            "output_key": key,
        },
    )


def _write_dataset(path: Path, n: int, marker=lambda i: "") -> Path:
    lines = []
    for i in range(n):
        lines.append(
            json.dumps(
                {
                    "id": f"item-{i}",
                    "question": f"Benchmark item {i}{marker(i)}: pick the first option.",
                    "options": [f"alpha-{i}", f"beta-{i}"],
                    "gold_index": 0,
                }
            )
        )
    path.write_text("\n".join(lines) + "\n", "utf-8")
    return path


# -- 1. concurrency speedup (wall-clock analogue of the reported 3.1x) ---


def test_concurrency_speedup(mock_server, tmp_path):
    started = time.monotonic()
    server = mock_server(
        MockScript(rules=[MockRule(match="", kind="generate", latency=0.1, response_text="A")])
    )
    dataset = _write_dataset(tmp_path / "bench200.jsonl", 200)

    def timed_run(workers: int, tag: str) -> float:
        config = _config(
            server, tmp_path, [_eval_step(dataset)], name=f"speed-{tag}", workers=workers
        )
        t0 = time.monotonic()
        run_pipeline(config, default_registry())
        return time.monotonic() - t0

    sequential = timed_run(1, "seq")
    concurrent = timed_run(8, "conc")
    speedup = sequential / concurrent
    elapsed = time.monotonic() - started
    with criterion(
        "concurrency-speedup",
        f"sequential {sequential:.1f}s / concurrent {concurrent:.1f}s = {speedup:.1f}x",
    ):
        assert speedup >= 3.0
        assert elapsed < 60.0


# -- 2. cache effectiveness: recovery from a mid-run failure -------------


def test_cache_recovery_after_interrupt(mock_server, tmp_path):
    started = time.monotonic()
    # the second half of the dataset fails hard on the first run
    script = MockScript(
        rules=[
            MockRule(match="HALF-B", kind="generate", fail_times=10**9, latency=0.01),
            MockRule(match="", kind="generate", latency=0.01, response_text="A"),
        ]
    )
    server = mock_server(script)
    dataset = _write_dataset(
        tmp_path / "bench60.jsonl", 60, marker=lambda i: " HALF-B" if i >= 30 else " HALF-A"
    )
    config = _config(
        server, tmp_path, [_eval_step(dataset)], name="recovery",
        gateway=GatewaySettings(retries=1, backoff_base=0.0),
    )
    with pytest.raises(StepFailure):
        run_pipeline(config, default_registry())
    first_half_calls = [
        e for e in server.logged_requests() if "HALF-A" in e["body"]["prompt"]
    ]
    assert len(first_half_calls) == 30  # half completed before the failure

    # backend recovers; rerun the identical config with the warm cache
    script.rules[0].fail_times = 0
    server.reset_failures()
    server.clear_log()
    ctx = run_pipeline(config, default_registry())
    rerun_calls = server.logged_requests()
    rerun_metrics = (Path(config.output_dir) / "metrics" / "eval.json").read_bytes()
    rerun_results = (Path(config.output_dir) / "results" / "eval.jsonl").read_bytes()

    # uninterrupted control run: fresh cache, fresh output dir
    control = _config(
        server, tmp_path, [_eval_step(dataset)], name="recovery-control",
        gateway=GatewaySettings(retries=1, backoff_base=0.0),
    )
    run_pipeline(control, default_registry())
    control_metrics = (Path(control.output_dir) / "metrics" / "eval.json").read_bytes()
    control_results = (Path(control.output_dir) / "results" / "eval.jsonl").read_bytes()

    elapsed = time.monotonic() - started
    with criterion(
        "cache-recovery",
        f"rerun made {len(rerun_calls)} network calls for the 30 uncompleted requests",
    ):
        # rerun touched the network only for previously-failed requests
        assert len(rerun_calls) == 30
        assert all("HALF-B" in e["body"]["prompt"] for e in rerun_calls)
        assert ctx.get("eval")["metric"]["n"] == 60
        # final metrics equal an uninterrupted run byte-for-byte
        assert rerun_metrics == control_metrics
        assert rerun_results == control_results
        assert elapsed < 60.0


# -- 3. in-flight bound and order preservation ---------------------------


def test_inflight_bound_and_order(mock_server, tmp_path):
    started = time.monotonic()
    rng = random.Random(20240917)
    rules = [
        MockRule(
            match=f"bucket-{k} ", kind="generate",
            latency=rng.uniform(0.002, 0.025), response_text="{prompt}",
        )
        for k in range(16)
    ]
    server = mock_server(MockScript(rules=rules))
    gateway = InferenceGateway(
        [backend_for(server)], retry=RetryPolicy(attempts=2, backoff_base=0.01)
    )
    requests_list = [
        InferenceRequest.generate(f"bucket-{rng.randrange(16)} req-{i} end", "mock-model")
        for i in range(1000)
    ]
    violations = []
    for workers in (1, 4, 16):
        server.clear_log()
        responses = gateway.submit_batch(requests_list, workers=workers)
        max_conc = server.max_concurrency()
        if max_conc > workers:
            violations.append(f"workers={workers} saw concurrency {max_conc}")
        for i, response in enumerate(responses):
            if f"req-{i} " not in response.text:
                violations.append(f"workers={workers} response {i} out of order")
                break
    elapsed = time.monotonic() - started
    with criterion("inflight-and-order", f"1000 requests x workers 1/4/16 in {elapsed:.0f}s"):
        assert not violations, violations
        assert elapsed < 120.0


# -- 4. rate limiter: sliding-window bound and exact R=1 timing ----------


def test_rate_limiter_window_and_timing():
    failures = []
    for rate in (1, 10, 60):
        rng = random.Random(rate * 1013)
        clock = FakeClock()
        limiter = RateLimiter(rate, clock)
        grants = []
        for _ in range(rate * 10):
            clock.advance(rng.choice([0.0, 0.0, 0.003, 0.2, 2.5, 35.0]))
            while True:
                wait = limiter.try_acquire(clock())
                if wait <= 0:
                    break
                clock.advance(wait)
            grants.append(clock())
        for i, anchor in enumerate(grants):
            window = sum(1 for g in grants[i:] if g < anchor + 60.0)
            if window > rate:
                failures.append(f"R={rate}: {window} grants in a 60s window")
                break

    # exact timing: R=1, two requests at t=0 -> second grant at t=60 +/- 1ms
    clock = FakeClock()
    limiter = RateLimiter(1, clock)
    assert limiter.try_acquire(clock()) == 0.0
    while True:
        wait = limiter.try_acquire(clock())
        if wait <= 0:
            break
        clock.advance(wait)
    second_grant = clock()
    with criterion("rate-limiter", f"second R=1 grant at t={second_grant:.6f}s"):
        assert not failures, failures
        assert abs(second_grant - 60.0) <= 0.001


# -- 5. min-k oracle equivalence and monotonicity ------------------------


def test_min_k_oracle_equivalence():
    rng = random.Random(777)
    ks = (1, 10, 20, 50, 100)
    checked = 0
    for _ in range(10_000):
        n = rng.randint(1, 32)
        logprobs = [rng.uniform(-15.0, 0.0) for _ in range(n)]
        previous = -math.inf
        for k in ks:
            got = compute_min_k(logprobs, k)
            want = brute_force_min_k(logprobs, k)
            assert abs(got - want) <= 1e-12, (logprobs, k)
            assert got >= previous - 1e-12, "monotonicity violated"
            previous = got
            checked += 1
    with criterion("min-k-oracle", f"{checked} comparisons within 1e-12"):
        assert checked == 50_000


# -- 6. contamination pipeline end-to-end --------------------------------

MIN_K_SCORE_RULES = [
    # full-text scoring of "<question> <gold answer>"; token counts 10/10/8/7
    MockRule(
        match="absorb from the air?", kind="score",
        token_logprobs=[-0.1, -0.2, -0.3, -0.4, -0.5, -0.6, -0.7, -0.8, -5.0, -6.0],
    ),
    MockRule(
        match="largest planet", kind="score",
        token_logprobs=[-0.25, -0.25, -0.25, -0.25, -0.25, -0.25, -0.25, -0.25, -0.25, -0.75],
    ),
    MockRule(
        match="liquid at room temperature", kind="score",
        token_logprobs=[-1.0, -2.0, -3.0, -4.0, -1.5, -2.5, -0.5, -3.5],
    ),
    MockRule(
        match="pulls objects toward Earth", kind="score",
        token_logprobs=[-0.3, -0.6, -0.9, -1.2, -0.2, -0.4, -0.8],
    ),
]

# hand computation, k=20%:
#   q1: 10 tokens -> E=2, two smallest -6.0, -5.0 -> mean -5.5
#   q2: 10 tokens -> E=2, two smallest -0.75, -0.25 -> mean -0.5
#   q3:  8 tokens -> E=1, smallest -4.0
#   q4:  7 tokens -> E=1, smallest -1.2
# threshold -2.0: flagged iff statistic > threshold -> q2, q4 -> fraction 0.5
EXPECTED_MIN_K = {"q1": -5.5, "q2": -0.5, "q3": -4.0, "q4": -1.2}
EXPECTED_FLAGS = {"q1": False, "q2": True, "q3": False, "q4": True}


def _contamination_config(server, tmp_path, name="contamination") -> PipelineConfig:
    return _config(
        server, tmp_path,
        [
            _eval_step(FIXTURES / "arc_mini.jsonl", key="arc_eval"),
            StepConfig(
                kind="min_k_detect",
                params={
                    "dataset": str(FIXTURES / "arc_mini.jsonl"),
                    "model": "mock-model",
                    "k_percent": 20,
                    "threshold": -2.0,
                    "output_key": "arc_min_k",
                },
            ),
        ],
        name=name,
    )


def test_contamination_pipeline_end_to_end(mock_server, tmp_path):
    server = mock_server(MockScript(rules=MCP_RULES + MIN_K_SCORE_RULES))
    config = _contamination_config(server, tmp_path)
    ctx = run_pipeline(config, default_registry())
    report = ctx.get("arc_min_k")
    stats = {p["instance_id"]: p["statistic"] for p in report["per_instance"]}
    flags = {p["instance_id"]: p["flagged"] for p in report["per_instance"]}
    with criterion("contamination-pipeline", f"stats {stats}"):
        assert stats == EXPECTED_MIN_K  # exact equality, no tolerance
        assert flags == EXPECTED_FLAGS
        assert report["aggregate"]["flagged_fraction"] == 0.5
        assert report["aggregate"]["mean_statistic"] == (-5.5 + -0.5 + -4.0 + -1.2) / 4
        assert report["aggregate"]["k_percent"] == 20
        # the upstream eval step also graded the fixture (hand-graded 2/4)
        assert ctx.get("arc_eval")["metric"]["overall"] == 0.5


# -- 7. CP/MCP scoring oracle with template metamorphism ------------------

HAND_GRADED = {
    # regime -> (accuracy, unparsed_rate); grading is template-independent
    "MCP": (0.5, 0.25),
    "CP": (0.75, 0.0),
}


def test_cp_mcp_scoring_oracle(mock_server, tmp_path):
    server = mock_server(MockScript(rules=MCP_RULES + CP_SCORE_RULES))
    tables = {}
    digests = {}
    metric_bytes = {}
    for regime in ("MCP", "CP"):
        for template in ("PromptA", "PromptB"):
            name = f"combo-{regime}-{template}"
            config = _config(
                server, tmp_path,
                [_eval_step(FIXTURES / "arc_mini.jsonl", regime=regime, template=template, key="eval")],
                name=name,
            )
            ctx = run_pipeline(config, default_registry())
            tables[(regime, template)] = ctx.get("eval")["metric"]
            digests[(regime, template)] = ctx.get("eval")["prompt_sha256"]
            metric_bytes[(regime, template)] = (
                Path(config.output_dir) / "metrics" / "eval.json"
            ).read_bytes()

    with criterion("cp-mcp-oracle", "4 combos match hand-graded truth"):
        for (regime, template), table in tables.items():
            accuracy, unparsed = HAND_GRADED[regime]
            assert table["overall"] == accuracy, (regime, template)
            assert table["unparsed_rate"] == unparsed, (regime, template)
            assert table["n"] == 4
        # metamorphic: swapping the template changes every rendered prompt
        # but leaves the metric artifact byte-identical
        for regime in ("MCP", "CP"):
            a, b = digests[(regime, "PromptA")], digests[(regime, "PromptB")]
            assert all(a[i] != b[i] for i in a)
            assert metric_bytes[(regime, "PromptA")] == metric_bytes[(regime, "PromptB")]


# -- 8. ROUGE-L and kappa oracles -----------------------------------------


def test_rouge_and_kappa_oracles():
    rng = random.Random(31337)
    rouge_checked = 0
    for _ in range(400):
        cand = [rng.choice("abcde") for _ in range(rng.randint(0, 8))]
        ref = [rng.choice("abcde") for _ in range(rng.randint(0, 8))]
        got = rouge_l(cand, ref)
        lcs = brute_force_lcs(cand, ref)
        if cand and ref:
            p, r = lcs / len(cand), lcs / len(ref)
            want = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        else:
            want = 0.0
        assert abs(got.f1 - want) <= 1e-12
        rouge_checked += 1

    kappa_checked = 0
    for _ in range(400):
        n = rng.randint(1, 50)
        l1 = [rng.choice(["A", "B", "tie"]) for _ in range(n)]
        l2 = [rng.choice(["A", "B", "tie"]) for _ in range(n)]
        assert abs(cohen_kappa(l1, l2) - brute_force_kappa(l1, l2)) <= 1e-12
        kappa_checked += 1

    worked_f1 = rouge_l("the cat".split(), "the cat sat".split()).f1
    worked_kappa = cohen_kappa(["A", "A", "B", "B"], ["A", "B", "A", "B"])
    with criterion(
        "rouge-kappa-oracles", f"{rouge_checked}+{kappa_checked} random cases within 1e-12"
    ):
        assert worked_f1 == 0.8  # exact
        assert worked_kappa == 0.0  # exact


# -- 9. position-bias protocol --------------------------------------------

CONSISTENT_JUDGE_RULES = [
    MockRule(match="A's response]\nRayleigh", kind="generate", response_text="[[A]]"),
    MockRule(match="A's response]\nBecause", kind="generate", response_text="[[B]]"),
    MockRule(match="A's response]\nUse slicing.", kind="generate", response_text="[[B]]"),
    MockRule(match="A's response]\nYou can call", kind="generate", response_text="[[A]]"),
    MockRule(match="A's response]\nWater boils", kind="generate", response_text="[[A]]"),
    MockRule(match="A's response]\nIt boils", kind="generate", response_text="[[B]]"),
    MockRule(match="A's response]\n25 is prime.", kind="generate", response_text="[[B]]"),
    MockRule(match="A's response]\n23 is a prime", kind="generate", response_text="[[A]]"),
]


def _judge_pipeline(server, tmp_path, name: str) -> dict:
    config = _config(
        server, tmp_path,
        [
            StepConfig(
                kind="llm_judge",
                params={
                    "pairs": str(FIXTURES / "judge_pairs.jsonl"),
                    "model": "mock-model",
                    "output_key": "judged",
                },
            ),
            StepConfig(
                kind="meta_eval",
                params={"verdicts_key": "judged", "output_key": "meta"},
            ),
        ],
        name=name,
    )
    return run_pipeline(config, default_registry()).get("meta")


def test_position_bias_protocol(mock_server, tmp_path):
    # position-dependent judge: always picks whatever sits in slot one
    biased = mock_server(MockScript(default_response="[[A]]"))
    biased_rate = _judge_pipeline(biased, tmp_path, "bias-all")["position_bias_rate"]

    # position-independent judge: a fixed preferred identity per pair
    fair = mock_server(MockScript(rules=CONSISTENT_JUDGE_RULES))
    fair_rate = _judge_pipeline(fair, tmp_path, "bias-none")["position_bias_rate"]

    # mixed: p1 and p4 judged consistently, p2 and p3 position-dependently
    mixed = mock_server(
        MockScript(rules=CONSISTENT_JUDGE_RULES[:2] + CONSISTENT_JUDGE_RULES[6:],
                   default_response="[[A]]")
    )
    mixed_rate = _judge_pipeline(mixed, tmp_path, "bias-mixed")["position_bias_rate"]

    with criterion(
        "position-bias-protocol",
        f"biased {biased_rate}, fair {fair_rate}, mixed {mixed_rate}",
    ):
        assert biased_rate == 1.0
        assert fair_rate == 0.0
        assert mixed_rate == 0.5


# -- 10. determinism of every acceptance pipeline --------------------------


def _strip_volatile(manifest: dict) -> dict:
    doc = json.loads(json.dumps(manifest))
    for event in doc.get("events", []):
        event.pop("wall_time", None)
    # output_dir and cache_dir differ between the two runs by construction
    doc["config"].pop("output_dir", None)
    doc["config"].pop("cache_dir", None)
    return doc


def test_determinism_identical_manifests(mock_server, tmp_path):
    server = mock_server(
        MockScript(rules=MCP_RULES + CP_SCORE_RULES + MIN_K_SCORE_RULES)
    )
    judge_server = mock_server(MockScript(rules=CONSISTENT_JUDGE_RULES))

    def build(kind: str, run: int) -> PipelineConfig:
        # same pipeline_id and seed across runs; only the run/cache
        # directories differ (and are stripped before comparison)
        per_run = dict(
            output_dir=str(tmp_path / f"det-{kind}-{run}"),
            cache_dir=str(tmp_path / f"det-{kind}-{run}-cache"),
        )
        if kind == "contamination":
            config = _contamination_config(server, tmp_path, name=f"det-{kind}")
            config.output_dir = per_run["output_dir"]
            config.cache_dir = per_run["cache_dir"]
            return config
        if kind == "cp":
            return _config(
                server, tmp_path,
                [_eval_step(FIXTURES / "arc_mini.jsonl", regime="CP", key="eval")],
                name=f"det-{kind}", **per_run,
            )
        if kind == "mcp-shots":
            return _config(
                server, tmp_path,
                [
                    StepConfig(
                        kind="dataset_eval",
                        params={
                            "dataset": str(FIXTURES / "arc_mini.jsonl"),
                            "model": "mock-model",
                            "shots": 2,
                            "output_key": "eval",
                        },
                    )
                ],
                name=f"det-{kind}", **per_run,
            )
        return _config(
            judge_server, tmp_path,
            [
                StepConfig(
                    kind="llm_judge",
                    params={
                        "pairs": str(FIXTURES / "judge_pairs.jsonl"),
                        "model": "mock-model",
                        "output_key": "judged",
                    },
                ),
                StepConfig(
                    kind="meta_eval",
                    params={"verdicts_key": "judged", "output_key": "meta"},
                ),
            ],
            name=f"det-{kind}", **per_run,
        )

    mismatches = []
    for kind in ("contamination", "cp", "mcp-shots", "judge"):
        manifests = []
        for run in (1, 2):
            config = build(kind, run)
            run_pipeline(config, default_registry())
            path = Path(config.output_dir) / MANIFEST_NAME
            manifests.append(_strip_volatile(json.loads(path.read_text())))
        first, second = manifests
        if first != second:
            mismatches.append(kind)
        if list(first["outputs"].values()) != list(second["outputs"].values()):
            mismatches.append(f"{kind}-digests")
    with criterion("determinism", "4 pipelines, seed-identical manifests"):
        assert not mismatches, mismatches
