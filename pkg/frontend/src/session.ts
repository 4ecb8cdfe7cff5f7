import { ServiceClient, StaleQueryError } from "./client.js";
import type { HistoryEntry } from "./render.js";
import type {
  Choice,
  QueryResponse,
  ResultPayload,
  SessionState,
} from "./types.js";
import { toQueryView, type QueryView } from "./view.js";

export interface ControllerHooks {
  onQuery(view: QueryView): void;
  onState(state: SessionState): void;
  onDone(result: ResultPayload): void;
  onNotice(message: string): void;
}

/**
 * Single active session per tab. All mutation flows through choose(); the
 * controller drops duplicate submissions locally (double-clicks, or a
 * second side clicked while a submit is in flight) so exactly one logical
 * answer reaches the service per query, and turns a stale-query conflict
 * into a refresh plus re-render.
 */
export class SessionController {
  private readonly answered = new Set<string>();
  private inflight = false;
  private view: QueryView | null = null;
  readonly history: HistoryEntry[] = [];

  constructor(
    private readonly client: ServiceClient,
    readonly sessionId: string,
    private readonly hooks: ControllerHooks,
    private readonly coin: () => number = Math.random,
  ) {}

  /** Fetch the outstanding query and the posterior, rendering both. */
  async refresh(): Promise<void> {
    this.applyResponse(await this.client.getQuery(this.sessionId));
    await this.refreshState();
  }

  private async refreshState(): Promise<void> {
    this.hooks.onState(await this.client.getState(this.sessionId));
  }

  private applyResponse(response: QueryResponse): void {
    if (response.status === "done" && response.result !== null) {
      this.view = null;
      this.hooks.onDone(response.result);
      return;
    }
    const query = response.query;
    if (query && (this.view === null || this.view.queryId !== query.query_id)) {
      this.view = toQueryView(query, this.coin);
      this.hooks.onQuery(this.view);
    }
  }

  /**
   * Submit one choice for the rendered query. Returns false when the
   * submission was dropped (already answered, already in flight) or was
   * stale; true when the answer was accepted.
   */
  async choose(view: QueryView, choice: Choice): Promise<boolean> {
    if (this.inflight || this.answered.has(view.queryId)) return false;
    this.inflight = true;
    try {
      const response = await this.client.submitAnswer(view.sessionId, {
        query_id: view.queryId,
        choice,
        position: view.position,
      });
      this.answered.add(view.queryId);
      const slot = view.left.choice === choice ? view.left : view.right;
      this.history.push({ queryId: view.queryId, choice, label: slot.label });
      this.applyResponse(response);
      await this.refreshState();
      return true;
    } catch (error) {
      if (error instanceof StaleQueryError) {
        this.hooks.onNotice("Another client answered this query; refreshing.");
        this.view = null;
        await this.refresh();
        return false;
      }
      throw error;
    } finally {
      this.inflight = false;
    }
  }
}
