import type {
  AnswerRequest,
  CreateSessionRequest,
  QueryResponse,
  SessionState,
  SessionSummary,
} from "./types.js";

/** Another client answered first, or the query was superseded. */
export class StaleQueryError extends Error {}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

async function detailOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText;
  }
}

/**
 * Thin typed wrapper over the session service HTTP surface. Every method
 * returns the service payload unmodified; a 409 becomes StaleQueryError so
 * callers can refresh and re-render instead of surfacing a failure.
 */
export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (response.status === 409) {
      throw new StaleQueryError(await detailOf(response));
    }
    if (!response.ok) {
      throw new ServiceError(response.status, await detailOf(response));
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  createSession(request: CreateSessionRequest): Promise<QueryResponse> {
    return this.post<QueryResponse>("/sessions", request);
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request<SessionSummary[]>("/sessions");
  }

  getQuery(sessionId: string): Promise<QueryResponse> {
    return this.request<QueryResponse>(`/sessions/${sessionId}/query`);
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${sessionId}/state`);
  }

  submitAnswer(
    sessionId: string,
    answer: AnswerRequest,
  ): Promise<QueryResponse> {
    return this.post<QueryResponse>(`/sessions/${sessionId}/answers`, answer);
  }
}
