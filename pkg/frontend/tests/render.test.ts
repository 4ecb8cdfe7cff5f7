import { beforeEach, describe, expect, it, vi } from "vitest";

import {
  renderHistory,
  renderPosterior,
  renderQuery,
} from "../src/render.js";
import type { SessionState } from "../src/types.js";
import { toQueryView } from "../src/view.js";
import type { QueryPayload } from "../src/types.js";
import queryDots from "./fixtures/query_dots.json";
import queryDotsEmpty from "./fixtures/query_dots_empty.json";
import queryPair from "./fixtures/query_pair.json";
import stateDone from "./fixtures/state_done.json";
import stateTwoLevel from "./fixtures/state_two_level.json";

const dotsQuery = queryDots.query as QueryPayload;
const emptyQuery = queryDotsEmpty.query as QueryPayload;
const pairQuery = queryPair.query as QueryPayload;

let container: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "";
  container = document.createElement("section");
  document.body.appendChild(container);
});

describe("renderQuery", () => {
  it("draws the 64-dot stimulus and two value-labeled buttons", () => {
    const view = toQueryView(dotsQuery, () => 0.9);
    renderQuery(container, view, () => {});
    expect(container.querySelectorAll("svg.stimulus-dots circle")).toHaveLength(
      64,
    );
    const buttons = container.querySelectorAll("button.choice");
    expect(buttons).toHaveLength(2);
    const labels = [...buttons].map((b) => b.textContent);
    expect(labels.sort()).toEqual(["35", "55"]);
    expect(container.querySelector("p.progress")?.textContent).toContain(
      "move 0",
    );
  });

  it("keeps buttons active over an empty canvas", () => {
    const view = toQueryView(emptyQuery, () => 0.9);
    renderQuery(container, view, () => {});
    expect(container.querySelectorAll("svg.stimulus-dots circle")).toHaveLength(
      0,
    );
    const buttons = [...container.querySelectorAll("button.choice")];
    expect(buttons).toHaveLength(2);
    for (const button of buttons) {
      expect((button as HTMLButtonElement).disabled).toBe(false);
    }
  });

  it("renders the prediction pair as text blocks", () => {
    const view = toQueryView(pairQuery, () => 0.9);
    renderQuery(container, view, () => {});
    const blocks = [
      ...container.querySelectorAll(".stimulus-pair .prediction"),
    ];
    expect(blocks.map((b) => b.textContent)).toEqual([
      "0.45 score",
      "0.55 score",
    ]);
    expect(container.querySelector("p.description")?.textContent).toBe(
      "held-out sample #12",
    );
  });

  it("reports the slot's original identity on click", () => {
    const view = toQueryView(dotsQuery, () => 0.2); // plus on the left
    const onChoose = vi.fn();
    renderQuery(container, view, onChoose);
    const left = container.querySelector<HTMLButtonElement>("button.left")!;
    expect(left.dataset.choice).toBe("plus");
    left.click();
    expect(onChoose).toHaveBeenCalledTimes(1);
    expect(onChoose).toHaveBeenCalledWith(view, "plus");
  });

  it("maps arrow keys onto the displayed sides", () => {
    const view = toQueryView(dotsQuery, () => 0.9); // minus on the left
    const onChoose = vi.fn();
    const handle = renderQuery(container, view, onChoose);
    expect(handle.handleKey("ArrowRight")).toBe(true);
    expect(onChoose).toHaveBeenCalledTimes(1);
    expect(onChoose).toHaveBeenCalledWith(view, "plus");
    expect(handle.handleKey("x")).toBe(false);
    expect(onChoose).toHaveBeenCalledTimes(1);
  });
});

describe("renderPosterior", () => {
  it("charts the step function with the service breakpoints verbatim", () => {
    renderPosterior(container, stateTwoLevel as SessionState);
    const line = container.querySelector("polyline")!;
    expect(line.getAttribute("points")?.split(" ")).toHaveLength(4);
    expect(line.dataset.breakpoints).toBe(
      stateTwoLevel.breakpoints.join(","),
    );
    expect(
      container.querySelector("p.width-indicator")?.textContent,
    ).toContain("vs target 0.05");
    expect(container.querySelector(".banner")).toBeNull();
  });

  it("shows the termination banner with the estimate and totals", () => {
    renderPosterior(container, stateDone as SessionState);
    const banner = container.querySelector(".banner")!;
    expect(banner.textContent).toContain("0.34958");
    expect(banner.textContent).toContain("50 comparisons");
    expect(banner.textContent).toContain("horizontal-budget");
  });
});

describe("renderHistory", () => {
  it("lists answered queries in order", () => {
    renderHistory(container, [
      { queryId: "q-0-0", choice: "plus", label: "55" },
      { queryId: "q-0-1", choice: "minus", label: "35" },
    ]);
    const items = [...container.querySelectorAll("li")];
    expect(items.map((i) => i.textContent)).toEqual([
      "q-0-0: chose 55",
      "q-0-1: chose 35",
    ]);
  });
});
