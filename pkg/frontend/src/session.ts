/**
 * Chat session state as a pure function of the received message
 * sequence. The client never originates action selection; it renders
 * exactly what the server sends, in order.
 */

import { ServerMessage, SystemTurn } from "./protocol.js";

export interface ChatTurn {
  speaker: "system" | "user";
  text: string;
  act?: string;
  reward?: number;
}

export type Phase =
  | "connecting"
  | "ready"
  | "awaiting_user"
  | "finished"
  | "error";

export interface SessionState {
  phase: Phase;
  turns: ChatTurn[];
  catalog: string[];
  vocabulary: string[];
  stateVector: number[];
  totalReward: number;
  lastError: string | null;
}

export function initialState(): SessionState {
  return {
    phase: "connecting",
    turns: [],
    catalog: [],
    vocabulary: [],
    stateVector: [],
    totalReward: 0,
    lastError: null,
  };
}

/** Record the human's own utterance (rendered optimistically on send). */
export function withUserTurn(state: SessionState, text: string): SessionState {
  return { ...state, turns: [...state.turns, { speaker: "user", text }] };
}

/** Start over (after a reset request): keep the handshake, drop the dialogue. */
export function clearedDialogue(state: SessionState): SessionState {
  return {
    ...state,
    turns: [],
    stateVector: [],
    totalReward: 0,
    phase: "ready",
    lastError: null,
  };
}

function appendSystemTurns(
  turns: ChatTurn[],
  incoming: SystemTurn[],
): ChatTurn[] {
  const out = [...turns];
  for (const turn of incoming) {
    if (turn.completed) {
      // finalises the reward of the system turn that awaited this input
      for (let i = out.length - 1; i >= 0; i--) {
        const candidate = out[i];
        if (candidate.speaker === "system" && candidate.reward === undefined) {
          out[i] = { ...candidate, reward: turn.reward ?? undefined };
          break;
        }
      }
      continue;
    }
    out.push({
      speaker: "system",
      text: turn.text,
      act: turn.act ?? undefined,
      reward: turn.reward ?? undefined,
    });
  }
  return out;
}

export function reduce(state: SessionState, msg: ServerMessage): SessionState {
  switch (msg.type) {
    case "hello":
      return {
        ...state,
        phase: "ready",
        catalog: msg.catalog,
        vocabulary: msg.vocabulary,
        lastError: null,
      };
    case "observation": {
      const turns = appendSystemTurns(state.turns, msg.system_turns ?? []);
      const phase: Phase = msg.terminal
        ? "finished"
        : msg.awaiting_input
          ? "awaiting_user"
          : "ready";
      return {
        ...state,
        turns,
        phase,
        stateVector: msg.state,
        totalReward: state.totalReward + msg.reward,
        lastError: null,
      };
    }
    case "error":
      return { ...state, lastError: `${msg.reason}: ${msg.detail}` };
    case "bye":
      return { ...state, phase: "finished" };
  }
}

/** Client-side gate for the input box. */
export function canSendText(state: SessionState, text: string): boolean {
  return state.phase === "awaiting_user" && text.trim().length > 0;
}
