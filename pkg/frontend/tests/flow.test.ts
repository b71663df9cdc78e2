import { describe, expect, it } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { AnnotationSession } from "../src/flow.js";
import { Progress, TaskView } from "../src/types.js";

interface FakeTask {
  task_id: string;
  question: string;
  mode: string;
  slot_1: string;
  slot_2: string;
}

/** In-memory stand-in for the annotation server, with a kill switch. */
class FakeServer {
  tasks: FakeTask[];
  submissions: Array<{ taskId: string; body: Record<string, unknown> }> = [];
  offline = false;
  cursor = 0;

  constructor(n: number) {
    this.tasks = Array.from({ length: n }, (_, i) => ({
      task_id: `t${i}`,
      question: `q${i}`,
      mode: "pairwise",
      slot_1: `left-${i}`,
      slot_2: `right-${i}`,
    }));
  }

  fetchFn: typeof fetch = async (input, init) => {
    const url = String(input);
    if (this.offline) {
      throw new TypeError("fetch failed (offline)");
    }
    if (url.includes("/api/tasks/next")) {
      const task =
        this.cursor < this.tasks.length
          ? { ...this.tasks[this.cursor], progress: this.progress() }
          : null;
      return json({ task });
    }
    if (url.includes("/submit")) {
      const taskId = decodeURIComponent(url.split("/tasks/")[1].split("/submit")[0]);
      if (this.submissions.some((s) => s.taskId === taskId)) {
        return json({ error: "already submitted" }, 409);
      }
      this.submissions.push({
        taskId,
        body: JSON.parse(String(init?.body)) as Record<string, unknown>,
      });
      this.cursor += 1;
      return json({ ok: true });
    }
    if (url.includes("/api/progress")) {
      return json(this.progress());
    }
    return json({ error: "not found" }, 404);
  };

  private progress(): Progress {
    return { total: this.tasks.length, done: this.submissions.length };
  }
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

interface Captured {
  tasks: TaskView[];
  completions: Progress[];
  errors: string[];
}

function makeSession(server: FakeServer, timeStep = 250) {
  const captured: Captured = { tasks: [], completions: [], errors: [] };
  let clock = 1000;
  const session = new AnnotationSession(
    new AnnotationApi("http://fake", server.fetchFn),
    "tester",
    {
      onTask: (view) => captured.tasks.push(view),
      onComplete: (progress) => captured.completions.push(progress),
      onError: (message) => captured.errors.push(message),
    },
    () => (clock += timeStep),
  );
  return { session, captured };
}

describe("AnnotationSession", () => {
  it("walks every task via keyboard and reaches the completion screen", async () => {
    const server = new FakeServer(4);
    const { session, captured } = makeSession(server);
    await session.start();
    while (session.currentTask !== null) {
      expect(await session.handleKey("1")).toBe(true);
    }
    expect(captured.tasks.map((t) => t.taskId)).toEqual(["t0", "t1", "t2", "t3"]);
    expect(server.submissions.map((s) => s.body["label"])).toEqual(["A", "A", "A", "A"]);
    expect(captured.completions).toHaveLength(1);
    expect(captured.completions[0]).toEqual({ total: 4, done: 4 });
  });

  it("sends slot-based labels for keys 1, 2, and t", async () => {
    const server = new FakeServer(3);
    const { session } = makeSession(server);
    await session.start();
    await session.handleKey("1");
    await session.handleKey("2");
    await session.handleKey("t");
    expect(server.submissions.map((s) => s.body["label"])).toEqual(["A", "B", "tie"]);
  });

  it("reports positive monotone elapsed time from render to submit", async () => {
    const server = new FakeServer(2);
    const { session } = makeSession(server, 500);
    await session.start();
    await session.handleKey("1");
    await session.handleKey("2");
    const elapsed = server.submissions.map((s) => Number(s.body["elapsed"]));
    expect(elapsed.every((s) => s > 0)).toBe(true);
  });

  it("ignores keys with no mapping and does not double-submit", async () => {
    const server = new FakeServer(1);
    const { session } = makeSession(server);
    await session.start();
    expect(await session.handleKey("x")).toBe(false);
    expect(await session.handleKey("Enter")).toBe(false);
    expect(server.submissions).toHaveLength(0);
    await session.handleKey("1");
    expect(server.submissions).toHaveLength(1);
  });

  it("queues the judgment while offline and flushes on reconnect", async () => {
    const server = new FakeServer(2);
    const { session, captured } = makeSession(server);
    await session.start();

    server.offline = true;
    await session.handleKey("1");
    expect(session.hasPending).toBe(true);
    expect(server.submissions).toHaveLength(0);
    expect(captured.errors.length).toBeGreaterThan(0);

    // still offline: retry keeps the judgment queued
    await session.flushPending();
    expect(session.hasPending).toBe(true);

    server.offline = false;
    await session.flushPending();
    expect(session.hasPending).toBe(false);
    expect(server.submissions).toHaveLength(1);
    expect(server.submissions[0].body["label"]).toBe("A");
    // the next task rendered only after the ack
    expect(captured.tasks.map((t) => t.taskId)).toEqual(["t0", "t1"]);
  });

  it("blocks new judgments while one is pending", async () => {
    const server = new FakeServer(2);
    const { session } = makeSession(server);
    await session.start();
    server.offline = true;
    await session.handleKey("1");
    expect(await session.handleKey("2")).toBe(false);
    server.offline = false;
    await session.flushPending();
    expect(server.submissions).toHaveLength(1);
  });

  it("refreshes the task on a double-submit conflict", async () => {
    const server = new FakeServer(2);
    const { session, captured } = makeSession(server);
    await session.start();
    // someone else answers t0 out from under us
    server.submissions.push({ taskId: "t0", body: { label: "B" } });
    server.cursor += 1;
    await session.handleKey("1");
    // conflict consumed, session moved on to t1 without recording an error
    expect(captured.tasks.map((t) => t.taskId)).toEqual(["t0", "t1"]);
    expect(session.currentTask?.taskId).toBe("t1");
  });
});
