/** Typed client for the annotation REST endpoints. */

import { Progress, TaskView, toTaskView } from "./types.js";

export class ConflictError extends Error {}
export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export interface SubmitBody {
  annotator: string;
  label?: string;
  score?: number;
  elapsed: number;
}

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /** Next pending task for this annotator, or null when none remain. */
  async nextTask(annotator: string): Promise<TaskView | null> {
    const url = `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotator)}`;
    const resp = await this.fetchFn(url);
    if (!resp.ok) {
      throw new ApiError(`next task failed: ${resp.status}`, resp.status);
    }
    const doc = (await resp.json()) as {
      task: Record<string, unknown> | null;
      progress?: Progress;
    };
    if (doc.task === null || doc.task === undefined) {
      return null;
    }
    const progress =
      (doc.task["progress"] as Progress) ?? doc.progress ?? { total: 0, done: 0 };
    return toTaskView(doc.task, progress);
  }

  async submit(taskId: string, body: SubmitBody): Promise<void> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/tasks/${encodeURIComponent(taskId)}/submit`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (resp.status === 409) {
      throw new ConflictError(`task ${taskId} already submitted`);
    }
    if (!resp.ok) {
      throw new ApiError(`submit failed: ${resp.status}`, resp.status);
    }
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/progress`);
    if (!resp.ok) {
      throw new ApiError(`progress failed: ${resp.status}`, resp.status);
    }
    return (await resp.json()) as Progress;
  }

  exportUrl(): string {
    return `${this.baseUrl}/api/export?format=jsonl`;
  }
}
