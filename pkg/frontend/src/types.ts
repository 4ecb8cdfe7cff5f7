// Wire types for the session service. Field names match the JSON payloads
// exactly; the client renders these verbatim and never derives algorithm
// state on its own.

export type Choice = "minus" | "plus";

export interface Progress {
  k: number;
  m: number;
  total_comparisons: number;
}

export interface DotStimulusPayload {
  points: [number, number][];
}

export interface QueryPayload {
  session_id: string;
  query_id: string;
  c_minus: number;
  c_plus: number;
  granularity: number;
  progress: Progress;
  context: Record<string, unknown>;
  stimulus?: DotStimulusPayload;
}

export interface ResultPayload {
  theta_hat: number;
  reason: string;
  moves: number;
  total_comparisons: number;
}

export interface QueryResponse {
  status: string;
  result: ResultPayload | null;
  query: QueryPayload | null;
}

export interface SessionState {
  session_id: string;
  kind: string;
  status: string;
  k: number;
  m: number;
  total_comparisons: number;
  epsilon: number;
  breakpoints: number[];
  densities: number[];
  result: ResultPayload | null;
  outstanding_query_id?: string;
}

export interface SessionSummary {
  session_id: string;
  kind: string;
  status: string;
  answers: number;
  created_at: number;
  updated_at: number;
}

/** Left/right assignment of the two candidates, recorded with each answer. */
export interface AnswerPosition {
  left: Choice;
  right: Choice;
}

export interface AnswerRequest {
  query_id: string;
  choice: Choice;
  responder_tag?: string;
  position?: AnswerPosition;
}

export type SessionKind = "scalar-alignment" | "dot-count" | "ass-sample";

export interface CreateSessionRequest {
  kind: SessionKind;
  params?: Record<string, unknown>;
  session_id?: string;
}
