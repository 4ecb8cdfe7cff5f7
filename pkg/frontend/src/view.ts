import type {
  AnswerPosition,
  Choice,
  Progress,
  QueryPayload,
} from "./types.js";

// What the evaluator sees for one query. The minus/plus identity of each
// displayed slot is randomized per render and the mapping travels with the
// answer payload so the stored logs stay analyzable for position bias.

export type Stimulus =
  | { kind: "dots"; points: [number, number][] }
  | { kind: "pair"; minusText: string; plusText: string };

export interface CandidateSlot {
  side: "left" | "right";
  choice: Choice;
  label: string;
}

export interface QueryView {
  sessionId: string;
  queryId: string;
  stimulus: Stimulus;
  left: CandidateSlot;
  right: CandidateSlot;
  position: AnswerPosition;
  progress: Progress;
  description: string | null;
}

/** Render a candidate value the way a human expects to read it. */
export function formatCandidate(value: number, unit?: string): string {
  const text = Number.isInteger(value)
    ? String(value)
    : value.toPrecision(4).replace(/\.?0+$/, "");
  return unit ? `${text} ${unit}` : text;
}

function toStimulus(payload: QueryPayload, unit?: string): Stimulus {
  if (payload.stimulus) {
    return { kind: "dots", points: payload.stimulus.points };
  }
  return {
    kind: "pair",
    minusText: formatCandidate(payload.c_minus, unit),
    plusText: formatCandidate(payload.c_plus, unit),
  };
}

/**
 * Build the display view for an outstanding query, flipping a fair coin for
 * the left/right order. `coin` defaults to Math.random and is injectable so
 * tests can pin the layout.
 */
export function toQueryView(
  payload: QueryPayload,
  coin: () => number = Math.random,
): QueryView {
  const unit = typeof payload.context.unit === "string"
    ? payload.context.unit
    : undefined;
  const description = typeof payload.context.description === "string"
    ? payload.context.description
    : null;
  const plusOnLeft = coin() < 0.5;
  const minusSlot = (side: "left" | "right"): CandidateSlot => ({
    side,
    choice: "minus",
    label: formatCandidate(payload.c_minus, unit),
  });
  const plusSlot = (side: "left" | "right"): CandidateSlot => ({
    side,
    choice: "plus",
    label: formatCandidate(payload.c_plus, unit),
  });
  const left = plusOnLeft ? plusSlot("left") : minusSlot("left");
  const right = plusOnLeft ? minusSlot("right") : plusSlot("right");
  return {
    sessionId: payload.session_id,
    queryId: payload.query_id,
    stimulus: toStimulus(payload, unit),
    left,
    right,
    position: { left: left.choice, right: right.choice },
    progress: payload.progress,
    description,
  };
}
