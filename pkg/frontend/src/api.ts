/** Typed client for the /v1 annotation API. All session state lives on the
 * server; this module only moves JSON across the wire. */

export type Answer = "closer" | "farther" | "same" | "ambiguous";

export const ANSWERS: readonly Answer[] = ["closer", "farther", "same", "ambiguous"];

export interface DisplayPayload {
  pose2d: [number, number][];
  edges: [number, number][];
  joint_names: string[];
  highlight: number[];
}

export interface SessionCreated {
  session_id: string;
  status: "in-progress" | "complete";
  question_count: number;
  joint_count: number;
}

export interface PendingQuestion {
  status: "in-progress";
  i: number;
  j: number;
  question_index: number;
  question_count: number;
  display: DisplayPayload;
}

export interface SessionComplete {
  status: "complete";
  question_count: number;
  ordering: number[][];
}

export type QuestionView = PendingQuestion | SessionComplete;

export interface AnswerAck {
  status: "in-progress" | "complete";
  question_count: number;
}

export interface RelationExport {
  pairs: { i: number; j: number; r: -1 | 0 | 1 }[];
  session_id: string;
  question_count: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail = typeof body?.detail === "string" ? body.detail : resp.statusText;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  createSession(itemId: string): Promise<SessionCreated> {
    return this.request("/v1/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ item_id: itemId }),
    });
  }

  getQuestion(sessionId: string): Promise<QuestionView> {
    return this.request(`/v1/sessions/${sessionId}/question`);
  }

  postAnswer(sessionId: string, answer: Answer, questionIndex: number): Promise<AnswerAck> {
    return this.request(`/v1/sessions/${sessionId}/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ answer, question_index: questionIndex }),
    });
  }

  getRelations(sessionId: string): Promise<RelationExport> {
    return this.request(`/v1/sessions/${sessionId}/relations`);
  }
}
