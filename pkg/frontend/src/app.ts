/** DOM wiring: builds the annotator UI inside a root element and connects it
 * to a SessionController. Exported as a function so tests can mount it in a
 * synthetic document against a real or mocked API. */
import { Answer, ApiClient } from "./api.js";
import { orderingLines, paint, skeletonCommands } from "./render.js";
import { SessionController, SessionStorageLike, ViewState } from "./session.js";

export interface AppOptions {
  api: ApiClient;
  storage: SessionStorageLike;
  defaultItemId?: string;
}

export interface AppHandles {
  controller: SessionController;
  root: HTMLElement;
}

const ANSWER_BUTTONS: { answer: Answer; label: string; key: string }[] = [
  { answer: "closer", label: "Closer (←)", key: "ArrowLeft" },
  { answer: "farther", label: "Farther (→)", key: "ArrowRight" },
  { answer: "same", label: "Same (=)", key: "=" },
  { answer: "ambiguous", label: "Ambiguous (?)", key: "?" },
];

export function mountApp(root: HTMLElement, options: AppOptions): AppHandles {
  const doc = root.ownerDocument;
  const controller = new SessionController(options.api, options.storage);

  root.innerHTML = "";

  const form = doc.createElement("div");
  form.className = "start-form";
  const itemInput = doc.createElement("input");
  itemInput.id = "item-id";
  itemInput.value = options.defaultItemId ?? "item-0000";
  const startBtn = doc.createElement("button");
  startBtn.id = "start";
  startBtn.textContent = "Start session";
  form.append(itemInput, startBtn);

  const statusLine = doc.createElement("div");
  statusLine.id = "status";
  const counter = doc.createElement("div");
  counter.id = "question-counter";
  const banner = doc.createElement("div");
  banner.id = "grouped-banner";
  banner.hidden = true;
  banner.textContent = "Same joint as the previous question — questions come grouped.";
  const prompt = doc.createElement("div");
  prompt.id = "prompt";

  const canvas = doc.createElement("canvas");
  canvas.id = "skeleton";
  canvas.width = 480;
  canvas.height = 480;

  const controls = doc.createElement("div");
  controls.id = "answers";
  const buttons = new Map<Answer, HTMLButtonElement>();
  for (const spec of ANSWER_BUTTONS) {
    const btn = doc.createElement("button");
    btn.id = `answer-${spec.answer}`;
    btn.textContent = spec.label;
    btn.disabled = true;
    btn.addEventListener("click", () => void controller.answer(spec.answer));
    buttons.set(spec.answer, btn);
    controls.appendChild(btn);
  }

  const ordering = doc.createElement("ol");
  ordering.id = "ordering";
  const errorBox = doc.createElement("div");
  errorBox.id = "error";
  errorBox.hidden = true;
  const retryBtn = doc.createElement("button");
  retryBtn.id = "retry";
  retryBtn.textContent = "Retry";
  retryBtn.addEventListener("click", () => void controller.refresh());
  errorBox.appendChild(doc.createElement("div")).id = "error-message";
  errorBox.appendChild(retryBtn);

  root.append(form, statusLine, counter, banner, prompt, canvas, controls, ordering, errorBox);

  startBtn.addEventListener("click", () => void controller.start(itemInput.value.trim()));
  doc.addEventListener("keydown", (event: KeyboardEvent) => {
    const spec = ANSWER_BUTTONS.find((s) => s.key === event.key);
    if (spec && controller.getState().kind === "question" && !controller.isBusy()) {
      void controller.answer(spec.answer);
    }
  });

  function setButtonsEnabled(enabled: boolean): void {
    for (const btn of buttons.values()) btn.disabled = !enabled;
  }

  function render(state: ViewState): void {
    errorBox.hidden = state.kind !== "error";
    banner.hidden = !(state.kind === "question" && state.groupedWithPrevious);
    setButtonsEnabled(state.kind === "question" && !controller.isBusy());

    if (state.kind === "idle") {
      statusLine.textContent = "Enter an item id and start a session.";
      counter.textContent = "";
      prompt.textContent = "";
      ordering.innerHTML = "";
    } else if (state.kind === "loading") {
      statusLine.textContent = state.message;
    } else if (state.kind === "question") {
      const q = state.question;
      statusLine.textContent = `Session ${state.sessionId} — in progress`;
      counter.textContent = `Question ${q.question_count + 1}`;
      const nameOf = (k: number) => q.display.joint_names[k] ?? `joint ${k}`;
      prompt.textContent =
        `Is ${nameOf(q.i)} closer to the camera than ${nameOf(q.j)}?`;
      ordering.innerHTML = "";
      try {
        const commands = skeletonCommands(q.display, {
          width: canvas.width,
          height: canvas.height,
          padding: 30,
        });
        const ctx = canvas.getContext("2d");
        if (ctx) paint(ctx, commands);
      } catch (err) {
        errorBox.hidden = false;
        const msg = errorBox.querySelector("#error-message");
        if (msg) msg.textContent = String(err);
        setButtonsEnabled(false);
      }
    } else if (state.kind === "complete") {
      statusLine.textContent = `Session ${state.sessionId} — complete`;
      counter.textContent = `Answered ${state.summary.question_count} questions ` +
        `(reference protocol averages ~17 for 14 joints)`;
      prompt.textContent = "Final depth ordering, closest first:";
      ordering.innerHTML = "";
      for (const line of orderingLines(state.summary.ordering, [])) {
        const li = doc.createElement("li");
        li.textContent = line;
        ordering.appendChild(li);
      }
    } else {
      const msg = errorBox.querySelector("#error-message");
      if (msg) msg.textContent = state.message;
      retryBtn.hidden = !state.retryable;
    }
  }

  controller.subscribe(render);
  return { controller, root };
}
