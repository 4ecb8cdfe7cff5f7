import { credibleWidth, stepPath, toPolyline } from "./posterior.js";
import type { Choice, ResultPayload, SessionState } from "./types.js";
import type { QueryView, Stimulus } from "./view.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface HistoryEntry {
  queryId: string;
  choice: Choice;
  label: string;
}

export interface QueryHandle {
  /** Keyboard shortcuts: ArrowLeft/ArrowRight pick the matching button. */
  handleKey(key: string): boolean;
}

type ChooseFn = (view: QueryView, choice: Choice) => void;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderStimulus(parent: HTMLElement, stimulus: Stimulus): void {
  const doc = parent.ownerDocument;
  if (stimulus.kind === "dots") {
    const svg = doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("class", "stimulus-dots");
    svg.setAttribute("viewBox", "0 0 1 1");
    svg.setAttribute("preserveAspectRatio", "xMidYMid meet");
    for (const [x, y] of stimulus.points) {
      const dot = doc.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(x));
      dot.setAttribute("cy", String(y));
      dot.setAttribute("r", "0.006");
      svg.appendChild(dot);
    }
    parent.appendChild(svg);
    return;
  }
  const pair = el(doc, "div", "stimulus-pair");
  pair.appendChild(el(doc, "div", "prediction minus", stimulus.minusText));
  pair.appendChild(el(doc, "div", "prediction plus", stimulus.plusText));
  parent.appendChild(pair);
}

/**
 * Draw the outstanding query: stimulus, progress line, and one button per
 * displayed side labeled with the candidate value. Clicks and keyboard
 * shortcuts both report the slot's original minus/plus identity, never the
 * displayed side.
 */
export function renderQuery(
  container: HTMLElement,
  view: QueryView,
  onChoose: ChooseFn,
): QueryHandle {
  const doc = container.ownerDocument;
  container.textContent = "";

  if (view.description !== null) {
    container.appendChild(el(doc, "p", "description", view.description));
  }
  renderStimulus(container, view.stimulus);
  container.appendChild(
    el(
      doc,
      "p",
      "progress",
      `move ${view.progress.k} · step ${view.progress.m} · ` +
        `${view.progress.total_comparisons} comparisons so far`,
    ),
  );

  const row = el(doc, "div", "choices");
  const buttons = new Map<"left" | "right", HTMLButtonElement>();
  for (const slot of [view.left, view.right]) {
    const button = el(doc, "button", `choice ${slot.side}`, slot.label);
    button.dataset.side = slot.side;
    button.dataset.choice = slot.choice;
    button.addEventListener("click", () => onChoose(view, slot.choice));
    buttons.set(slot.side, button);
    row.appendChild(button);
  }
  container.appendChild(row);
  container.appendChild(
    el(doc, "p", "hint", "arrow keys: left/right pick a side"),
  );

  return {
    handleKey(key: string): boolean {
      const side =
        key === "ArrowLeft" ? "left" : key === "ArrowRight" ? "right" : null;
      if (side === null) return false;
      buttons.get(side)!.click();
      return true;
    },
  };
}

function renderBanner(doc: Document, result: ResultPayload): HTMLElement {
  const banner = el(doc, "div", "banner");
  banner.appendChild(el(doc, "strong", undefined, "Session finished"));
  banner.appendChild(
    el(
      doc,
      "p",
      undefined,
      `estimate ${result.theta_hat} after ${result.total_comparisons} ` +
        `comparisons (${result.moves} moves, stopped: ${result.reason})`,
    ),
  );
  return banner;
}

/**
 * Step-function chart of the served density plus a width indicator against
 * epsilon; a termination banner once the session is done. All numbers come
 * straight from get-state.
 */
export function renderPosterior(
  container: HTMLElement,
  state: SessionState,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";

  const points = stepPath(state.breakpoints, state.densities);
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "posterior-chart");
  svg.setAttribute("viewBox", "0 0 320 120");
  const line = doc.createElementNS(SVG_NS, "polyline");
  line.setAttribute("fill", "none");
  line.setAttribute("points", toPolyline(points, 320, 120));
  line.dataset.breakpoints = state.breakpoints.join(",");
  svg.appendChild(line);
  container.appendChild(svg);

  const width = credibleWidth(state.breakpoints, state.densities);
  container.appendChild(
    el(
      doc,
      "p",
      "width-indicator",
      `95% credible width ${width.toPrecision(3)} vs target ${state.epsilon}`,
    ),
  );

  if (state.status === "done" && state.result !== null) {
    container.appendChild(renderBanner(doc, state.result));
  }
}

export function renderHistory(
  container: HTMLElement,
  entries: HistoryEntry[],
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const list = el(doc, "ol", "history");
  for (const entry of entries) {
    list.appendChild(
      el(doc, "li", undefined, `${entry.queryId}: chose ${entry.label}`),
    );
  }
  container.appendChild(list);
}
