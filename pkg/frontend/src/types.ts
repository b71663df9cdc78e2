/** Payload shapes exchanged with the annotation REST API. */

export interface Progress {
  total: number;
  done: number;
  assigned?: number;
  pending?: number;
}

export interface PairwiseTaskView {
  taskId: string;
  question: string;
  mode: "pairwise";
  slot1: string;
  slot2: string;
  progress: Progress;
}

export interface DirectTaskView {
  taskId: string;
  question: string;
  mode: "direct";
  response: string;
  scale: { min: number; max: number };
  progress: Progress;
}

export type TaskView = PairwiseTaskView | DirectTaskView;

/** A captured judgment: slot label for pairwise, 1-10 score for direct. */
export type Judgment = { label: "A" | "B" | "tie" } | { score: number };

/**
 * Narrow a raw API task payload to exactly the fields the UI may render.
 * Model identities or any other metadata the server might carry never
 * survive this conversion, so they cannot leak into the DOM.
 */
export function toTaskView(raw: Record<string, unknown>, progress: Progress): TaskView {
  const base = {
    taskId: String(raw["task_id"]),
    question: String(raw["question"] ?? ""),
  };
  if (raw["mode"] === "direct") {
    const scale = (raw["scale"] as { min: number; max: number }) ?? { min: 1, max: 10 };
    return {
      ...base,
      mode: "direct",
      response: String(raw["response"] ?? ""),
      scale,
      progress,
    };
  }
  return {
    ...base,
    mode: "pairwise",
    slot1: String(raw["slot_1"] ?? ""),
    slot2: String(raw["slot_2"] ?? ""),
    progress,
  };
}
