import { ServiceClient } from "./client.js";
import {
  renderHistory,
  renderPosterior,
  renderQuery,
  type QueryHandle,
} from "./render.js";
import { SessionController } from "./session.js";
import type { SessionKind } from "./types.js";

// Browser entry point: one session view per tab, selected via
// ?session=<id>, with a small creation form when none is given. Polling
// keeps the query and posterior fresh when another client answers.

const POLL_MS = 2000;

function must<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("service") ?? "";
  const sessionId = params.get("session");
  const client = new ServiceClient(baseUrl);

  const queryRoot = must<HTMLElement>("query");
  const posteriorRoot = must<HTMLElement>("posterior");
  const historyRoot = must<HTMLElement>("history");
  const noticeRoot = must<HTMLElement>("notice");
  const progressToggle = must<HTMLInputElement>("show-progress");

  if (sessionId === null) {
    const form = must<HTMLFormElement>("create-form");
    form.hidden = false;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const kind = must<HTMLSelectElement>("kind").value as SessionKind;
      void client.createSession({ kind }).then((response) => {
        const id = response.query?.session_id;
        if (id) window.location.search = `?session=${id}`;
      });
    });
    return;
  }

  let handle: QueryHandle | null = null;
  const controller = new SessionController(client, sessionId, {
    onQuery(view) {
      handle = renderQuery(queryRoot, view, (v, choice) => {
        void controller.choose(v, choice);
      });
      queryRoot.classList.toggle("hide-progress", !progressToggle.checked);
      renderHistory(historyRoot, controller.history);
    },
    onState(state) {
      renderPosterior(posteriorRoot, state);
    },
    onDone() {
      handle = null;
      queryRoot.textContent = "";
      renderHistory(historyRoot, controller.history);
    },
    onNotice(message) {
      noticeRoot.textContent = message;
    },
  });

  document.addEventListener("keydown", (event) => {
    if (handle?.handleKey(event.key)) event.preventDefault();
  });
  progressToggle.addEventListener("change", () => {
    queryRoot.classList.toggle("hide-progress", !progressToggle.checked);
  });

  void controller.refresh();
  window.setInterval(() => void controller.refresh(), POLL_MS);
}

bootstrap();
