/** Session controller: a thin state machine around the /v1 API.
 *
 * The server is the single source of truth — this controller never infers
 * orderings or picks questions. It guarantees:
 *   - at most one request in flight per session (controls lock while pending);
 *   - an acknowledged answer is always followed by a fresh question fetch, so
 *     a stale question is never displayed;
 *   - the session id is persisted, so a page reload resumes at the pending
 *     question the server still holds.
 */
import { Answer, ApiClient, ApiError, PendingQuestion, SessionComplete } from "./api.js";

export type ViewState =
  | { kind: "idle" }
  | { kind: "loading"; message: string }
  | {
      kind: "question";
      sessionId: string;
      question: PendingQuestion;
      groupedWithPrevious: boolean;
    }
  | { kind: "complete"; sessionId: string; summary: SessionComplete }
  | { kind: "error"; message: string; retryable: boolean };

export interface SessionStorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const STORAGE_KEY = "ordpose.active_session";

export class SessionController {
  private state: ViewState = { kind: "idle" };
  private inFlight = false;
  private sessionId: string | null = null;
  private lastQuestion: PendingQuestion | null = null;
  private listeners: ((state: ViewState) => void)[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly storage: SessionStorageLike,
  ) {}

  subscribe(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  getState(): ViewState {
    return this.state;
  }

  /** True while a request is pending; answer controls must be disabled. */
  isBusy(): boolean {
    return this.inFlight;
  }

  private setState(next: ViewState): void {
    this.state = next;
    for (const fn of this.listeners) fn(next);
  }

  /** Run one exclusive request; concurrent triggers (double clicks, repeated
   * keypresses) are dropped rather than queued. */
  private async exclusive(work: () => Promise<void>): Promise<boolean> {
    if (this.inFlight) return false;
    this.inFlight = true;
    try {
      await work();
      return true;
    } finally {
      this.inFlight = false;
      // re-notify so views can re-enable controls now that isBusy() is false
      for (const fn of this.listeners) fn(this.state);
    }
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError) {
      // Protocol conflicts (stale/duplicate answer) resolve by re-syncing
      // with the server; anything else is shown as-is.
      this.setState({ kind: "error", message: err.message, retryable: err.status === 409 });
    } else {
      this.setState({
        kind: "error",
        message: `network failure: ${String(err)} — retry when the service is reachable`,
        retryable: true,
      });
    }
  }

  /** Start a fresh session for an item. */
  async start(itemId: string): Promise<void> {
    await this.exclusive(async () => {
      this.setState({ kind: "loading", message: `creating session for ${itemId}…` });
      try {
        const created = await this.api.createSession(itemId);
        this.sessionId = created.session_id;
        this.lastQuestion = null;
        this.storage.setItem(STORAGE_KEY, created.session_id);
        await this.fetchQuestion();
      } catch (err) {
        this.fail(err);
      }
    });
  }

  /** Resume the session recorded in storage, if any. Returns whether a
   * session was found; the pending question comes back from the server. */
  async resume(): Promise<boolean> {
    const saved = this.storage.getItem(STORAGE_KEY);
    if (!saved) return false;
    this.sessionId = saved;
    this.lastQuestion = null;
    await this.exclusive(async () => {
      this.setState({ kind: "loading", message: `resuming ${saved}…` });
      try {
        await this.fetchQuestion();
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          // the server no longer knows this session (e.g. ephemeral store)
          this.storage.removeItem(STORAGE_KEY);
          this.sessionId = null;
          this.setState({ kind: "idle" });
        } else {
          this.fail(err);
        }
      }
    });
    return this.sessionId !== null;
  }

  /** Answer the currently displayed question. Ignored while busy, so a
   * double click sends exactly one POST. */
  async answer(answer: Answer): Promise<void> {
    const current = this.state;
    if (current.kind !== "question" || this.sessionId === null) return;
    const sessionId = this.sessionId;
    await this.exclusive(async () => {
      try {
        await this.api.postAnswer(sessionId, answer, current.question.question_index);
        await this.fetchQuestion();
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          // duplicate/stale answer: the server already moved on — re-sync
          await this.fetchQuestion().catch((e) => this.fail(e));
        } else {
          this.fail(err);
        }
      }
    });
  }

  /** Re-sync the view with the server (also the retry action on errors). */
  async refresh(): Promise<void> {
    if (this.sessionId === null) return;
    await this.exclusive(async () => {
      try {
        await this.fetchQuestion();
      } catch (err) {
        this.fail(err);
      }
    });
  }

  private async fetchQuestion(): Promise<void> {
    if (this.sessionId === null) throw new Error("no active session");
    const view = await this.api.getQuestion(this.sessionId);
    if (view.status === "complete") {
      this.storage.removeItem(STORAGE_KEY);
      this.lastQuestion = null;
      this.setState({ kind: "complete", sessionId: this.sessionId, summary: view });
      return;
    }
    if (
      view.i < 0 ||
      view.j < 0 ||
      view.i >= view.display.pose2d.length ||
      view.j >= view.display.pose2d.length
    ) {
      this.setState({
        kind: "error",
        message: `malformed question payload: pair (${view.i}, ${view.j}) outside the skeleton`,
        retryable: false,
      });
      return;
    }
    // consecutive questions about the same joint-under-placement are grouped
    const grouped = this.lastQuestion !== null && this.lastQuestion.i === view.i;
    this.lastQuestion = view;
    this.setState({
      kind: "question",
      sessionId: this.sessionId,
      question: view,
      groupedWithPrevious: grouped,
    });
  }
}
