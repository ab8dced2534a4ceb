import { describe, expect, it } from "vitest";

import { Answer, ApiClient } from "../src/api.js";
import { SessionController, SessionStorageLike } from "../src/session.js";

/** Minimal in-memory stand-in for window.localStorage. */
function memoryStorage(): SessionStorageLike {
  const map = new Map<string, string>();
  return {
    getItem: (k) => map.get(k) ?? null,
    setItem: (k, v) => void map.set(k, v),
    removeItem: (k) => void map.delete(k),
  };
}

interface ServerScript {
  /** Scripted 3-joint server: joint depths 0 < 1 < 2, strict ordering. */
  postCount: number;
  failNextFetch?: boolean;
}

/** A tiny in-memory /v1 server implementing the same contract as the real
 * service for a 3-joint item, used to exercise the controller offline. */
function fakeServer(script: ServerScript): ApiClient {
  const depths = [10, 20, 30];
  let session: { classes: number[][]; nextJoint: number; lo: number; hi: number } | null = null;
  let questionCount = 0;

  function currentQuestion(): [number, number] | null {
    if (!session || session.nextJoint >= depths.length) return null;
    const mid = Math.floor((session.lo + session.hi) / 2);
    return [session.nextJoint, session.classes[mid]![0]!];
  }

  function applyAnswer(answer: Answer): void {
    if (!session) throw new Error("no session");
    const q = currentQuestion();
    if (!q) throw new Error("complete");
    const s = session;
    const mid = Math.floor((s.lo + s.hi) / 2);
    const advance = () => {
      s.nextJoint += 1;
      s.lo = 0;
      s.hi = s.classes.length;
    };
    if (answer === "same" || answer === "ambiguous") {
      s.classes[mid]!.push(q[0]);
      advance();
    } else {
      if (answer === "closer") s.hi = mid;
      else s.lo = mid + 1;
      if (s.lo >= s.hi) {
        s.classes.splice(s.lo, 0, [s.nextJoint]);
        advance();
      }
    }
    questionCount += 1;
  }

  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    const respond = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), { status });
    if (script.failNextFetch) {
      script.failNextFetch = false;
      throw new TypeError("fetch failed");
    }
    if (input.endsWith("/v1/sessions") && init?.method === "POST") {
      session = { classes: [[0]], nextJoint: 1, lo: 0, hi: 1 };
      questionCount = 0;
      return respond(200, {
        session_id: "session-000000",
        status: "in-progress",
        question_count: 0,
        joint_count: 3,
      });
    }
    if (input.includes("/question")) {
      if (!session) return respond(404, { detail: "unknown session" });
      const q = currentQuestion();
      if (!q) {
        return respond(200, {
          status: "complete",
          question_count: questionCount,
          ordering: session.classes,
        });
      }
      return respond(200, {
        status: "in-progress",
        i: q[0],
        j: q[1],
        question_index: questionCount,
        question_count: questionCount,
        display: {
          pose2d: [
            [0, 0],
            [10, 10],
            [20, 20],
          ],
          edges: [
            [0, 1],
            [1, 2],
          ],
          joint_names: ["a", "b", "c"],
          highlight: [q[0], q[1]],
        },
      });
    }
    if (input.includes("/answer")) {
      script.postCount += 1;
      const body = JSON.parse(String(init?.body));
      if (!session) return respond(404, { detail: "unknown session" });
      if (body.question_index !== undefined && body.question_index !== questionCount) {
        return respond(409, { detail: "stale answer" });
      }
      if (!currentQuestion()) return respond(409, { detail: "session complete" });
      applyAnswer(body.answer);
      return respond(200, {
        status: currentQuestion() ? "in-progress" : "complete",
        question_count: questionCount,
      });
    }
    return respond(404, { detail: `unknown route ${input}` });
  };
  return new ApiClient("http://fake", fetchImpl);
}

describe("SessionController", () => {
  it("walks a 3-joint session to completion", async () => {
    const script: ServerScript = { postCount: 0 };
    const controller = new SessionController(fakeServer(script), memoryStorage());
    await controller.start("item-0000");
    while (controller.getState().kind === "question") {
      await controller.answer("farther"); // deterministic: true order 0 < 1 < 2
    }
    const state = controller.getState();
    expect(state.kind).toBe("complete");
    if (state.kind === "complete") {
      expect(state.summary.ordering).toEqual([[0], [1], [2]]);
    }
  });

  it("sends exactly one POST for overlapping answer calls", async () => {
    const script: ServerScript = { postCount: 0 };
    const controller = new SessionController(fakeServer(script), memoryStorage());
    await controller.start("item-0000");
    // double click: second call lands while the first request is in flight
    await Promise.all([controller.answer("farther"), controller.answer("farther")]);
    expect(script.postCount).toBe(1);
  });

  it("never shows a stale question after an acknowledged answer", async () => {
    const script: ServerScript = { postCount: 0 };
    const controller = new SessionController(fakeServer(script), memoryStorage());
    await controller.start("item-0000");
    const first = controller.getState();
    expect(first.kind).toBe("question");
    const firstIndex = first.kind === "question" ? first.question.question_index : -1;
    await controller.answer("farther");
    const next = controller.getState();
    if (next.kind === "question") {
      expect(next.question.question_index).toBe(firstIndex + 1);
    } else {
      expect(next.kind).toBe("complete");
    }
  });

  it("resumes from storage at the server's pending question", async () => {
    const script: ServerScript = { postCount: 0 };
    const api = fakeServer(script);
    const storage = memoryStorage();
    const controller = new SessionController(api, storage);
    await controller.start("item-0000");
    await controller.answer("farther");
    const before = controller.getState();

    // same storage + same server: a fresh controller is a page reload
    const reloaded = new SessionController(api, storage);
    expect(await reloaded.resume()).toBe(true);
    const after = reloaded.getState();
    expect(after.kind).toBe("question");
    if (after.kind === "question" && before.kind === "question") {
      expect(after.question.i).toBe(before.question.i);
      expect(after.question.j).toBe(before.question.j);
      expect(after.question.question_index).toBe(before.question.question_index);
    }
  });

  it("returns false from resume with empty storage", async () => {
    const controller = new SessionController(fakeServer({ postCount: 0 }), memoryStorage());
    expect(await controller.resume()).toBe(false);
    expect(controller.getState().kind).toBe("idle");
  });

  it("surfaces network failures as retryable errors and recovers", async () => {
    const script: ServerScript = { postCount: 0 };
    const controller = new SessionController(fakeServer(script), memoryStorage());
    await controller.start("item-0000");
    script.failNextFetch = true;
    await controller.answer("farther");
    const failed = controller.getState();
    expect(failed.kind).toBe("error");
    if (failed.kind === "error") expect(failed.retryable).toBe(true);
    await controller.refresh();
    expect(controller.getState().kind).toBe("question");
  });

  it("re-syncs on a 409 conflict instead of showing a stale question", async () => {
    const script: ServerScript = { postCount: 0 };
    const api = fakeServer(script);
    const storage = memoryStorage();
    const controller = new SessionController(api, storage);
    await controller.start("item-0000");

    // a second tab answers the same question first
    const other = new SessionController(api, storage);
    await other.resume();
    await other.answer("farther");

    await controller.answer("closer"); // stale: server replies 409, we re-sync
    const state = controller.getState();
    expect(state.kind).toBe("question");
    if (state.kind === "question") {
      expect(state.question.question_index).toBe(1);
    }
  });

  it("flags malformed question payloads as a visible error", async () => {
    const broken = new ApiClient("http://fake", async (input, init) => {
      if (input.endsWith("/v1/sessions") && init?.method === "POST") {
        return new Response(
          JSON.stringify({
            session_id: "s",
            status: "in-progress",
            question_count: 0,
            joint_count: 3,
          }),
          { status: 200 },
        );
      }
      return new Response(
        JSON.stringify({
          status: "in-progress",
          i: 0,
          j: 99, // out of range for the 2-point pose below
          question_index: 0,
          question_count: 0,
          display: { pose2d: [[0, 0], [1, 1]], edges: [], joint_names: [], highlight: [] },
        }),
        { status: 200 },
      );
    });
    const controller = new SessionController(broken, memoryStorage());
    await controller.start("item-0000");
    const state = controller.getState();
    expect(state.kind).toBe("error");
    if (state.kind === "error") {
      expect(state.message).toMatch(/malformed/);
      expect(state.retryable).toBe(false);
    }
  });
});
