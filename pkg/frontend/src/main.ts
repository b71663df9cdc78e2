import { AnnotationApi } from "./api.js";
import { AnnotationSession } from "./flow.js";
import { renderComplete, renderTask, showBanner } from "./ui.js";

const RETRY_INTERVAL_MS = 3000;

function start(annotatorId: string): void {
  const api = new AnnotationApi("");
  const session = new AnnotationSession(api, annotatorId, {
    onTask(view) {
      showBanner("");
      renderTask(view);
    },
    onComplete(progress) {
      showBanner("");
      renderComplete(progress);
    },
    onError(message, willRetry) {
      showBanner(willRetry ? `${message} — retrying…` : message);
    },
  });

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) {
      return;
    }
    void session.handleKey(event.key);
  });

  window.setInterval(() => {
    if (session.hasPending) {
      void session.flushPending();
    }
  }, RETRY_INTERVAL_MS);
  window.addEventListener("online", () => void session.flushPending());

  void session.start();
}

function init(): void {
  const form = document.getElementById("login-form") as HTMLFormElement;
  const input = document.getElementById("annotator-id") as HTMLInputElement;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const annotatorId = input.value.trim();
    if (!annotatorId) {
      return;
    }
    (document.getElementById("screen-login") as HTMLElement).hidden = true;
    start(annotatorId);
  });
  input.focus();
}

init();
