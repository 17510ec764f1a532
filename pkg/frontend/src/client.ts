/**
 * WebSocket transport: numbers outgoing messages, parses replies, and
 * feeds them to a listener in arrival order.
 */

import { OutgoingPayload, parseServerMessage, ServerMessage } from "./protocol.js";

export interface ChatSocket {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: never) => void): void;
}

export type MessageListener = (msg: ServerMessage) => void;

export class ChatClient {
  private nextId = 0;
  private socket: WebSocket | null = null;

  constructor(
    private readonly url: string,
    private readonly onMessage: MessageListener,
    private readonly onClose: (clean: boolean) => void,
  ) {}

  connect(): void {
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.addEventListener("open", () => {
      this.post({ type: "hello", mode: "interactive" });
      this.post({ type: "reset" });
    });
    socket.addEventListener("message", (event: MessageEvent) => {
      this.onMessage(parseServerMessage(String(event.data)));
    });
    socket.addEventListener("close", (event: CloseEvent) => {
      this.onClose(event.wasClean);
    });
    socket.addEventListener("error", () => {
      this.onClose(false);
    });
  }

  post(payload: OutgoingPayload): void {
    if (!this.socket || this.socket.readyState !== WebSocket.OPEN) {
      return;
    }
    const message = { ...payload, id: this.nextId++ };
    this.socket.send(JSON.stringify(message));
  }

  sendUserText(text: string): void {
    this.post({ type: "user_text", text });
  }

  newDialogue(): void {
    this.post({ type: "reset" });
  }

  disconnect(): void {
    this.socket?.close();
    this.socket = null;
  }
}
