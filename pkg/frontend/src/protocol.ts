/**
 * Wire schema shared with the environment server. One JSON object per
 * WebSocket text frame; replies echo the request id.
 */

export type OutgoingPayload =
  | { type: "hello"; mode: "interactive" | "simulated" }
  | { type: "reset" }
  | { type: "user_text"; text: string }
  | { type: "bye" };

export type ClientMessage = OutgoingPayload & { id: number };

export interface SystemTurn {
  act: string | null;
  text: string;
  reward: number | null;
  completed?: boolean;
}

export interface HelloReply {
  id: number;
  type: "hello";
  mode: string;
  catalog: string[];
  vocabulary: string[];
}

export interface ObservationReply {
  id: number;
  type: "observation";
  state: number[];
  reward: number;
  terminal: boolean;
  valid_actions: string[];
  system_text: string;
  user_text: string;
  system_turns?: SystemTurn[];
  awaiting_input?: boolean;
}

export interface ErrorReply {
  id: number;
  type: "error";
  reason: string;
  detail: string;
}

export interface ByeReply {
  id: number;
  type: "bye";
}

export type ServerMessage = HelloReply | ObservationReply | ErrorReply | ByeReply;

export function parseServerMessage(raw: string): ServerMessage {
  const value = JSON.parse(raw) as Record<string, unknown>;
  const type = value["type"];
  if (
    type !== "hello" &&
    type !== "observation" &&
    type !== "error" &&
    type !== "bye"
  ) {
    throw new Error(`unknown server message type: ${String(type)}`);
  }
  return value as unknown as ServerMessage;
}
