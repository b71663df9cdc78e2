/**
 * Session state machine: fetch next task, render, capture one judgment,
 * submit with elapsed time, repeat until the queue is empty.
 *
 * A submit that fails on the network is preserved locally and retried
 * (flushPending, called by the caller on a timer or online event); each
 * submit must be acknowledged before the next task renders. A 409 conflict
 * means someone already answered this task, so the session just refreshes.
 */

import { AnnotationApi, ConflictError } from "./api.js";
import { keyToJudgment } from "./keys.js";
import { Judgment, Progress, TaskView } from "./types.js";

export interface SessionCallbacks {
  onTask(view: TaskView): void;
  onComplete(progress: Progress): void;
  onError(message: string, willRetry: boolean): void;
}

interface PendingSubmit {
  taskId: string;
  judgment: Judgment;
  elapsed: number;
}

export class AnnotationSession {
  private current: TaskView | null = null;
  private renderedAt = 0;
  private pending: PendingSubmit | null = null;
  private busy = false;

  constructor(
    private readonly api: AnnotationApi,
    readonly annotatorId: string,
    private readonly callbacks: SessionCallbacks,
    private readonly now: () => number = () => Date.now(),
  ) {}

  get currentTask(): TaskView | null {
    return this.current;
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }

  async start(): Promise<void> {
    await this.fetchNext();
  }

  /** Map a keypress onto the current task; returns false if ignored. */
  async handleKey(key: string): Promise<boolean> {
    if (this.current === null || this.busy || this.pending !== null) {
      return false;
    }
    const judgment = keyToJudgment(key, this.current.mode);
    if (judgment === null) {
      return false;
    }
    await this.judge(judgment);
    return true;
  }

  /** Submit a judgment for the current task, then advance. */
  async judge(judgment: Judgment): Promise<void> {
    if (this.current === null) {
      return;
    }
    const elapsed = Math.max((this.now() - this.renderedAt) / 1000, 0.001);
    await this.trySubmit({ taskId: this.current.taskId, judgment, elapsed });
  }

  /** Retry a judgment that previously failed on the network. */
  async flushPending(): Promise<void> {
    if (this.pending === null || this.busy) {
      return;
    }
    const submit = this.pending;
    this.pending = null;
    await this.trySubmit(submit);
  }

  private async trySubmit(submit: PendingSubmit): Promise<void> {
    this.busy = true;
    try {
      await this.api.submit(submit.taskId, {
        annotator: this.annotatorId,
        ...("label" in submit.judgment
          ? { label: submit.judgment.label }
          : { score: submit.judgment.score }),
        elapsed: submit.elapsed,
      });
    } catch (err) {
      if (err instanceof ConflictError) {
        // someone already answered; refresh to the next task
        this.busy = false;
        await this.fetchNext();
        return;
      }
      // network failure: keep the judgment for retry, do not advance
      this.pending = submit;
      this.busy = false;
      this.callbacks.onError(String(err), true);
      return;
    }
    this.busy = false;
    await this.fetchNext();
  }

  private async fetchNext(): Promise<void> {
    let task: TaskView | null;
    try {
      task = await this.api.nextTask(this.annotatorId);
    } catch (err) {
      this.callbacks.onError(String(err), true);
      return;
    }
    this.current = task;
    if (task === null) {
      let progress: Progress = { total: 0, done: 0 };
      try {
        progress = await this.api.progress();
      } catch {
        // completion screen still renders without fresh numbers
      }
      this.callbacks.onComplete(progress);
      return;
    }
    this.renderedAt = this.now();
    this.callbacks.onTask(task);
  }
}
