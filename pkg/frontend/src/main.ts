import { ApiError, liveApi, type Api } from "./api.js";
import { SessionController } from "./controller.js";
import { renderFinal, renderRound, renderSparkline } from "./view.js";
import type { SessionView } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

const SKELETON = `
  <section class="start-panel" id="start-panel">
    <h1>Diagnostic console</h1>
    <p class="hint">Describe the presenting symptoms, then answer the follow-up
    questions with yes or no.</p>
    <form id="start-form">
      <div class="chip-row" id="chip-row"></div>
      <input id="symptom-input" list="symptom-vocab" autocomplete="off"
             placeholder="type a symptom and press Enter" />
      <datalist id="symptom-vocab"></datalist>
      <label class="tau-row">
        Diagnose above
        <input id="tau-slider" type="range" min="0" max="0.95" step="0.05" value="0.5" />
        <output id="tau-value">0.50</output>
      </label>
      <button id="start-button" type="submit" disabled>Start session</button>
      <p class="form-error" id="form-error" hidden></p>
    </form>
  </section>
  <section class="session-panel" id="session-panel" hidden>
    <div class="session-head">
      <h2>Session</h2>
      <div id="sparkline" title="entropy by round"></div>
    </div>
    <div id="rounds"></div>
    <div class="answer-panel" id="answer-panel" hidden>
      <button id="answer-yes" type="button">Yes</button>
      <button id="answer-no" type="button">No</button>
    </div>
    <div id="final"></div>
    <p class="form-error" id="session-error" hidden></p>
  </section>
`;

export function mountConsole(root: HTMLElement, api: Api = liveApi): {
  controller: SessionController;
} {
  root.innerHTML = SKELETON;
  const byId = <T extends HTMLElement>(id: string) =>
    root.querySelector<T>(`#${id}`) as T;

  const chipRow = byId<HTMLDivElement>("chip-row");
  const input = byId<HTMLInputElement>("symptom-input");
  const vocabList = byId<HTMLElement>("symptom-vocab");
  const slider = byId<HTMLInputElement>("tau-slider");
  const sliderOut = byId<HTMLOutputElement>("tau-value");
  const startForm = byId<HTMLFormElement>("start-form");
  const startButton = byId<HTMLButtonElement>("start-button");
  const formError = byId<HTMLParagraphElement>("form-error");
  const sessionPanel = byId<HTMLElement>("session-panel");
  const roundsBox = byId<HTMLDivElement>("rounds");
  const answerPanel = byId<HTMLDivElement>("answer-panel");
  const yesButton = byId<HTMLButtonElement>("answer-yes");
  const noButton = byId<HTMLButtonElement>("answer-no");
  const finalBox = byId<HTMLDivElement>("final");
  const sparklineBox = byId<HTMLDivElement>("sparkline");
  const sessionError = byId<HTMLParagraphElement>("session-error");

  const controller = new SessionController(api);
  const chips = new Set<string>();
  let renderedRounds = 0;

  api
    .fetchConfig()
    .then((config) => {
      for (const token of config.vocabulary) {
        vocabList.append(el("option", { value: token }));
      }
      slider.value = String(config.defaults.tau);
      sliderOut.value = Number(config.defaults.tau).toFixed(2);
    })
    .catch(() => {
      formError.hidden = false;
      formError.textContent = "service unreachable; is the server running?";
    });

  function syncChips(): void {
    chipRow.textContent = "";
    for (const token of chips) {
      const chip = el("button", { type: "button", class: "chip" }, token);
      chip.addEventListener("click", () => {
        chips.delete(token);
        syncChips();
      });
      chipRow.append(chip);
    }
    startButton.disabled = chips.size === 0 || controller.view !== null;
  }

  function addChip(): void {
    const token = input.value.trim().toLowerCase();
    if (token) {
      chips.add(token);
      input.value = "";
      syncChips();
    }
  }

  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      event.preventDefault();
      addChip();
    }
  });
  input.addEventListener("change", addChip);

  slider.addEventListener("input", () => {
    sliderOut.value = Number(slider.value).toFixed(2);
  });

  function sync(view: SessionView): void {
    sessionPanel.hidden = false;
    for (const round of view.rounds.slice(renderedRounds)) {
      roundsBox.append(renderRound(round));
    }
    renderedRounds = view.rounds.length;

    sparklineBox.textContent = "";
    sparklineBox.append(renderSparkline(view.rounds.map((r) => r.entropy)));

    if (view.status === "finished") {
      answerPanel.hidden = true;
      if (view.final && finalBox.childElementCount === 0) {
        finalBox.append(renderFinal(view.final));
      }
    } else {
      answerPanel.hidden = false;
    }
  }

  function setAnswerLock(locked: boolean): void {
    yesButton.disabled = locked;
    noButton.disabled = locked;
  }

  startForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (chips.size === 0 || controller.view !== null) return;
    formError.hidden = true;
    startButton.disabled = true;
    input.disabled = true;
    slider.disabled = true;
    controller
      .start([...chips], Number(slider.value))
      .then(sync)
      .catch((err) => {
        formError.hidden = false;
        formError.textContent = err instanceof ApiError ? err.message : String(err);
        startButton.disabled = false;
        input.disabled = false;
        slider.disabled = false;
      });
  });

  function onAnswer(value: "yes" | "no"): void {
    sessionError.hidden = true;
    setAnswerLock(true);
    controller
      .answer(value)
      .then((view) => {
        if (view) sync(view);
      })
      .catch((err) => {
        sessionError.hidden = false;
        sessionError.textContent =
          err instanceof ApiError ? err.message : String(err);
      })
      .finally(() => {
        setAnswerLock(false);
      });
  }

  yesButton.addEventListener("click", () => onAnswer("yes"));
  noButton.addEventListener("click", () => onAnswer("no"));

  syncChips();
  return { controller };
}
