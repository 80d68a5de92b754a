// DOM wiring: assessor login, training page, ten trial pages, completion.

import { fetchSession, postRatings } from "./api.js";
import { TrialPlayer } from "./player.js";
import { SessionRunner } from "./session.js";
import { SessionViewData, TrialState } from "./state.js";

const root = document.getElementById("app") as HTMLElement;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function clear(): void {
  root.replaceChildren();
}

function showLogin(): void {
  clear();
  const box = el("div", { class: "panel" });
  box.append(el("h1", {}, "Listening test"));
  box.append(el("p", {}, "Enter your assessor id to begin or resume your session."));
  const input = el("input", { type: "text", placeholder: "assessor id", id: "assessor" });
  const button = el("button", {}, "Start");
  button.addEventListener("click", () => {
    const id = input.value.trim();
    if (id) void startSession(id);
  });
  box.append(input, button);
  root.append(box);
}

async function startSession(assessorId: string): Promise<void> {
  clear();
  root.append(el("p", {}, "Loading session..."));
  let view: SessionViewData;
  try {
    view = await fetchSession(assessorId);
  } catch (err) {
    clear();
    const panel = el("div", { class: "panel error" });
    panel.append(el("p", {}, `Could not load the session (${String(err)}).`));
    const retry = el("button", {}, "Retry");
    retry.addEventListener("click", () => void startSession(assessorId));
    panel.append(retry);
    root.append(panel);
    return;
  }
  const runner = new SessionRunner(view, window.localStorage, postRatings);
  const player = new TrialPlayer();
  if (runner.currentIndex() === 0 && !runner.hasPendingRetry()) {
    showTraining(view, runner, player);
  } else {
    player.lockVolume(); // resumed mid-test: volume stays fixed
    showNext(view, runner, player);
  }
}

function showTraining(view: SessionViewData, runner: SessionRunner, player: TrialPlayer): void {
  clear();
  const panel = el("div", { class: "panel" });
  panel.append(el("h1", {}, "Training"));
  panel.append(el("p", {}, [
    "Listen to the examples below: each pair is a clean excerpt and the same",
    "excerpt degraded by packet loss. Set a comfortable volume now; it stays",
    "fixed for the rest of the test.",
  ].join(" ")));

  const volumeRow = el("div", { class: "row" });
  volumeRow.append(el("span", {}, "Volume"));
  const volume = el("input", { type: "range", min: "0", max: "100", value: "80" });
  volume.addEventListener("input", () => player.setVolume(Number(volume.value) / 80));
  volumeRow.append(volume);
  panel.append(volumeRow);

  for (const item of view.training) {
    const row = el("div", { class: "row" });
    const play = el("button", {}, `Play ${item.label}`);
    play.addEventListener("click", () => {
      void player
        .load(item.token)
        .then(() => player.play(item.token))
        .catch(() => row.append(el("span", { class: "error" }, " failed to load")));
    });
    row.append(play);
    panel.append(row);
  }

  const begin = el("button", { class: "primary" }, "Begin the test");
  begin.addEventListener("click", () => {
    player.stop();
    player.lockVolume();
    volume.setAttribute("disabled", "disabled");
    showNext(view, runner, player);
  });
  panel.append(begin);
  root.append(panel);
}

function showNext(view: SessionViewData, runner: SessionRunner, player: TrialPlayer): void {
  if (runner.isComplete()) {
    showCompletion(runner);
    return;
  }
  showTrial(view, runner, player, runner.currentTrial()!);
}

function showTrial(
  view: SessionViewData,
  runner: SessionRunner,
  player: TrialPlayer,
  trial: TrialState,
): void {
  clear();
  player.reset();
  const panel = el("div", { class: "panel" });
  const n = runner.currentIndex() + 1;
  panel.append(el("h1", {}, `Trial ${n} of ${runner.trials.length}`));
  panel.append(el("p", {}, [
    "Rate how similar each item sounds to the reference (0 = very different,",
    "100 = identical). Play everything at least once; switching is seamless.",
  ].join(" ")));

  const status = el("p", { class: "status" });
  const submit = el("button", { class: "primary", disabled: "disabled" }, "Submit ratings");

  const refresh = () => {
    const blockers = trial.blockers();
    if (blockers.length === 0) {
      submit.removeAttribute("disabled");
      status.textContent = "Ready to submit.";
    } else {
      submit.setAttribute("disabled", "disabled");
      status.textContent = "To submit: " + blockers.join("; ") + ".";
    }
  };

  const refRow = el("div", { class: "row reference" });
  const refButton = el("button", {}, "Play Reference");
  refButton.addEventListener("click", () => {
    void player
      .load(trial.referenceToken)
      .then(() => {
        player.play(trial.referenceToken);
        trial.markPlayed(trial.referenceToken);
        refresh();
      })
      .catch(() => {
        trial.markUnplayable(trial.referenceToken);
        refRow.append(el("span", { class: "error" }, " failed to load"));
        refresh();
      });
  });
  refRow.append(refButton);
  panel.append(refRow);

  trial.tokens.forEach((token, index) => {
    const row = el("div", { class: "row condition" });
    const play = el("button", {}, `Play ${String.fromCharCode(65 + index)}`);
    play.addEventListener("click", () => {
      void player
        .load(token)
        .then(() => {
          player.play(token);
          trial.markPlayed(token);
          refresh();
        })
        .catch(() => {
          trial.markUnplayable(token);
          row.append(el("span", { class: "error" }, " failed to load"));
          refresh();
        });
    });
    const slider = el("input", {
      type: "range", min: "0", max: "100", value: String(trial.sliderValue(token)),
    });
    const value = el("span", { class: "value" }, String(trial.sliderValue(token)));
    slider.addEventListener("input", () => {
      const clamped = trial.setSlider(token, Number(slider.value));
      value.textContent = String(clamped);
      refresh();
    });
    const confirm = el("button", { class: "confirm" }, "Keep 100");
    confirm.addEventListener("click", () => {
      trial.confirmSlider(token);
      confirm.setAttribute("disabled", "disabled");
      refresh();
    });
    row.append(play, slider, value, confirm);
    panel.append(row);
  });

  submit.addEventListener("click", () => {
    submit.setAttribute("disabled", "disabled");
    player.stop();
    void runner.submitCurrent().then((outcome) => {
      if (outcome === "advanced") {
        showNext(view, runner, player);
      } else {
        status.textContent = "Submission failed; your ratings are kept locally.";
        submit.textContent = "Retry submission";
        submit.removeAttribute("disabled");
      }
    });
  });

  panel.append(status, submit);
  root.append(panel);
  refresh();
}

function showCompletion(runner: SessionRunner): void {
  clear();
  const panel = el("div", { class: "panel" });
  panel.append(el("h1", {}, "All trials submitted"));
  const minutes = Math.floor(runner.elapsedSeconds() / 60);
  const seconds = runner.elapsedSeconds() % 60;
  panel.append(el("p", {}, `Thank you. Elapsed time: ${minutes} min ${seconds} s.`));
  root.append(panel);
}

showLogin();
