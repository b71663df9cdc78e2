/** DOM rendering. Only fields present on TaskView ever reach the page. */

import { Progress, TaskView } from "./types.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

export function renderTask(view: TaskView): void {
  el("screen-task").hidden = false;
  el("screen-done").hidden = true;
  el("question").textContent = view.question;
  renderProgress(view.progress);
  if (view.mode === "pairwise") {
    el("pairwise").hidden = false;
    el("direct").hidden = true;
    el("slot-1").textContent = view.slot1;
    el("slot-2").textContent = view.slot2;
  } else {
    el("pairwise").hidden = true;
    el("direct").hidden = false;
    el("single-response").textContent = view.response;
    el("scale-hint").textContent =
      `Press 1-9 to score, 0 for ${view.scale.max} (scale ${view.scale.min}-${view.scale.max})`;
  }
}

export function renderComplete(progress: Progress): void {
  el("screen-task").hidden = true;
  el("screen-done").hidden = false;
  el("done-summary").textContent =
    `${progress.done} of ${progress.total} tasks annotated. ` +
    "Export the dataset from /api/export?format=jsonl";
}

export function renderProgress(progress: Progress): void {
  el("progress").textContent = `${progress.done} / ${progress.total} done`;
}

export function showBanner(message: string, isError = true): void {
  const banner = el("banner");
  banner.textContent = message;
  banner.classList.toggle("error", isError);
  banner.hidden = message === "";
}
