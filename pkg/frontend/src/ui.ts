/**
 * DOM wiring: renders the session state after every server message and
 * forwards user input. A debug toggle reveals per-turn acts, rewards
 * and a sparkline of the current state vector.
 */

import { ChatClient } from "./client.js";
import {
  canSendText,
  clearedDialogue,
  initialState,
  reduce,
  SessionState,
  withUserTurn,
} from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function drawSparkline(canvas: HTMLCanvasElement, values: number[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (values.length === 0) return;
  const barWidth = canvas.width / values.length;
  ctx.fillStyle = "#4a7cc9";
  values.forEach((v, i) => {
    const h = Math.max(1, v * (canvas.height - 2));
    ctx.fillRect(i * barWidth, canvas.height - h, Math.max(1, barWidth - 1), h);
  });
}

export function mountApp(): void {
  const log = el<HTMLDivElement>("chat-log");
  const input = el<HTMLInputElement>("chat-input");
  const sendButton = el<HTMLButtonElement>("send-button");
  const newButton = el<HTMLButtonElement>("new-dialogue");
  const retryButton = el<HTMLButtonElement>("retry");
  const statusLine = el<HTMLDivElement>("status");
  const debugToggle = el<HTMLInputElement>("debug-toggle");
  const debugPanel = el<HTMLDivElement>("debug-panel");
  const sparkline = el<HTMLCanvasElement>("state-sparkline");
  const rewardTotal = el<HTMLSpanElement>("reward-total");

  let state: SessionState = initialState();

  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const params = new URLSearchParams(location.search);
  const server =
    params.get("server") ?? `${scheme}://${location.hostname}:8202`;

  const client = new ChatClient(
    server,
    (msg) => {
      state = reduce(state, msg);
      render();
    },
    (clean) => {
      if (state.phase !== "finished" || !clean) {
        state = { ...state, phase: "error", lastError: "connection lost" };
      }
      render();
    },
  );

  function render(): void {
    log.innerHTML = "";
    for (const turn of state.turns) {
      const bubble = document.createElement("div");
      bubble.className = `turn ${turn.speaker}`;
      const text = document.createElement("span");
      text.textContent = turn.text;
      bubble.appendChild(text);
      if (debugToggle.checked && turn.speaker === "system" && turn.act) {
        const badge = document.createElement("span");
        badge.className = "badge";
        badge.textContent =
          turn.reward === undefined
            ? turn.act
            : `${turn.act} r=${turn.reward.toFixed(2)}`;
        bubble.appendChild(badge);
      }
      log.appendChild(bubble);
    }
    log.scrollTop = log.scrollHeight;

    const awaiting = state.phase === "awaiting_user";
    input.disabled = !awaiting;
    sendButton.disabled = !awaiting;
    newButton.hidden = state.phase !== "finished";
    retryButton.hidden = state.phase !== "error";
    statusLine.textContent =
      state.lastError ??
      {
        connecting: "connecting…",
        ready: "system is thinking…",
        awaiting_user: "your turn",
        finished: "dialogue finished",
        error: "connection error",
      }[state.phase];
    statusLine.className = state.phase === "error" ? "status error" : "status";

    debugPanel.hidden = !debugToggle.checked;
    if (debugToggle.checked) {
      drawSparkline(sparkline, state.stateVector);
      rewardTotal.textContent = state.totalReward.toFixed(3);
    }
  }

  function submit(): void {
    const text = input.value;
    if (!canSendText(state, text)) return;
    state = withUserTurn(state, text.trim());
    client.sendUserText(text.trim());
    input.value = "";
    render();
  }

  sendButton.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") submit();
  });
  newButton.addEventListener("click", () => {
    state = clearedDialogue(state);
    client.newDialogue();
    render();
  });
  retryButton.addEventListener("click", () => {
    state = initialState();
    client.connect();
    render();
  });
  debugToggle.addEventListener("change", render);

  client.connect();
  render();
}

mountApp();
