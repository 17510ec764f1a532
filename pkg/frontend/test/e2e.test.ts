/**
 * Full-stack check: spawn the Python environment server with a policy,
 * hold a complete dialogue over the WebSocket port, and compare the
 * rendered turns against the transcript the server wrote.
 *
 * Requires the deepdial package to be installed (pip install -e ..);
 * set POLICY=path to chat with a trained policy instead of the built-in
 * demonstration policy.
 */

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { parseServerMessage, ServerMessage } from "../src/protocol.js";
import { initialState, reduce, SessionState, withUserTurn } from "../src/session.js";

const POLICY = process.env.POLICY ?? "expert";

let server: ChildProcess;
let wsPort = 0;
let workDir = "";
let transcriptPath = "";

function startServer(): Promise<void> {
  workDir = mkdtempSync(join(tmpdir(), "deepdial-e2e-"));
  transcriptPath = join(workDir, "transcript.log");
  server = spawn(
    "python3",
    [
      "-m",
      "deepdial.cli",
      "serve",
      "--port", "0",
      "--ws-port", "0",
      "--noise", "off",
      "--seed", "0",
      "--policy", POLICY,
      "--transcript", transcriptPath,
    ],
    { stdio: ["ignore", "pipe", "inherit"] },
  );
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not start")), 30000);
    let buffer = "";
    server.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/:(\d+) \(websocket\)/);
      if (match) {
        wsPort = Number(match[1]);
        clearTimeout(timer);
        resolve();
      }
    });
    server.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early with code ${code}`));
    });
  });
}

class WsSession {
  private ws: WebSocket;
  private queue: ServerMessage[] = [];
  private waiters: ((msg: ServerMessage) => void)[] = [];
  private nextId = 0;
  state: SessionState = initialState();

  constructor(port: number) {
    this.ws = new WebSocket(`ws://127.0.0.1:${port}`);
    this.ws.on("message", (data) => {
      const msg = parseServerMessage(data.toString());
      this.state = reduce(this.state, msg);
      const waiter = this.waiters.shift();
      if (waiter) waiter(msg);
      else this.queue.push(msg);
    });
  }

  open(): Promise<void> {
    return new Promise((resolve) => this.ws.on("open", () => resolve()));
  }

  request(payload: Record<string, unknown>): Promise<ServerMessage> {
    const msg = { ...payload, id: this.nextId++ };
    const reply = new Promise<ServerMessage>((resolve) => {
      const queued = this.queue.shift();
      if (queued) resolve(queued);
      else this.waiters.push(resolve);
    });
    this.ws.send(JSON.stringify(msg));
    return reply;
  }

  sendUserText(text: string): Promise<ServerMessage> {
    this.state = withUserTurn(this.state, text);
    return this.request({ type: "user_text", text });
  }

  close(): void {
    this.ws.close();
  }
}

describe("web chat against a live server", () => {
  beforeAll(async () => {
    await startServer();
  }, 40000);

  afterAll(() => {
    server?.kill();
    rmSync(workDir, { recursive: true, force: true });
  });

  it("completes a dialogue from greeting to closing", async () => {
    const session = new WsSession(wsPort);
    await session.open();

    const hello = await session.request({ type: "hello", mode: "interactive" });
    expect(hello.type).toBe("hello");
    expect(session.state.catalog).toHaveLength(35);

    let reply = await session.request({ type: "reset" });
    expect(reply.type).toBe("observation");
    expect(session.state.turns[0].text).toBe("Hello!");
    expect(session.state.phase).toBe("awaiting_user");

    const answers = [
      "reasonably priced mexican food in the east of town",
      "yes",
      "no",
    ];
    for (const answer of answers) {
      if (session.state.phase !== "awaiting_user") break;
      reply = await session.request({ type: "user_text", text: answer });
      expect(reply.type).toBe("observation");
    }
    expect(session.state.phase).toBe("finished");

    const systemTexts = session.state.turns
      .filter((t) => t.speaker === "system")
      .map((t) => t.text);
    expect(systemTexts[0]).toBe("Hello!");
    expect(systemTexts[systemTexts.length - 1]).toBe(
      "Okay, talk to you soon. Bye!",
    );

    // rendered system turns equal the transcript the server logged
    const transcript = readFileSync(transcriptPath, "utf-8")
      .trim()
      .split("\n")
      .filter((line) => line.includes(" | "));
    const loggedTexts = transcript.map((line) => line.split(" | ")[2]);
    const loggedActs = transcript.map((line) => line.split(" | ")[1]);
    expect(loggedTexts).toEqual(systemTexts);
    const renderedActs = session.state.turns
      .filter((t) => t.speaker === "system")
      .map((t) => t.act);
    expect(renderedActs).toEqual(loggedActs);

    session.close();
  }, 30000);

  it("starts a fresh episode after reconnecting", async () => {
    const first = new WsSession(wsPort);
    await first.open();
    await first.request({ type: "hello", mode: "interactive" });
    await first.request({ type: "reset" });
    first.close();

    const second = new WsSession(wsPort);
    await second.open();
    await second.request({ type: "hello", mode: "interactive" });
    const reply = await second.request({ type: "reset" });
    expect(reply.type).toBe("observation");
    expect(second.state.turns[0].text).toBe("Hello!");
    expect(second.state.turns).toHaveLength(2); // greeting + first question
    second.close();
  }, 30000);

  it("rejects user text when no input is awaited", async () => {
    const session = new WsSession(wsPort);
    await session.open();
    await session.request({ type: "hello", mode: "interactive" });
    const reply = await session.request({ type: "user_text", text: "hello" });
    expect(reply.type).toBe("error");
    session.close();
  }, 30000);
});
