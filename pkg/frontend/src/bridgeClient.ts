// Thin websocket wrapper with a latest-snapshot buffer, decoupling
// rendering from message arrival. Works with the browser WebSocket or any
// compatible constructor injected for tests (the `ws` package).

import type { ClientMessage, Hello, ServerMessage, Snapshot } from "./types.js";
import { SnapshotBuffer } from "./render.js";

type WebSocketLike = {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (ev: any) => void): void;
};

type WebSocketCtor = new (url: string) => WebSocketLike;

export class BridgeClient {
  readonly buffer = new SnapshotBuffer();
  hello: Hello | null = null;
  connected = false;
  onSnapshot: ((snap: Snapshot) => void) | null = null;
  onStatus: ((status: string) => void) | null = null;
  private ws: WebSocketLike | null = null;
  private pendingReplies: Array<(msg: ServerMessage) => void> = [];

  constructor(private readonly ctor: WebSocketCtor) {}

  connect(url: string): Promise<Hello> {
    return new Promise((resolve, reject) => {
      const ws = new this.ctor(url);
      this.ws = ws;
      ws.addEventListener("open", () => {
        this.connected = true;
        this.onStatus?.("connected");
      });
      ws.addEventListener("close", () => {
        this.connected = false;
        this.onStatus?.("disconnected");
      });
      ws.addEventListener("error", () => {
        this.onStatus?.("error");
        reject(new Error("websocket error"));
      });
      ws.addEventListener("message", (ev: { data: unknown }) => {
        let msg: ServerMessage;
        try {
          msg = JSON.parse(String(ev.data));
        } catch {
          this.onStatus?.("bad message");
          return;
        }
        if (msg.type === "hello") {
          this.hello = msg;
          resolve(msg);
          return;
        }
        if (msg.type === "snapshot") {
          const snap = this.buffer.push(msg);
          if (snap) this.onSnapshot?.(snap);
        }
        const waiter = this.pendingReplies.shift();
        if (waiter) waiter(msg);
      });
    });
  }

  /** Fire-and-forget input; dropped with a status note while disconnected. */
  send(msg: ClientMessage): boolean {
    if (!this.ws || !this.connected) {
      this.onStatus?.("input dropped: disconnected");
      return false;
    }
    this.ws.send(JSON.stringify(msg));
    return true;
  }

  /** Send and await the next server reply (lockstep advance, link echo). */
  request(msg: ClientMessage): Promise<ServerMessage> {
    return new Promise((resolve, reject) => {
      if (!this.send(msg)) {
        reject(new Error("disconnected"));
        return;
      }
      this.pendingReplies.push(resolve);
    });
  }

  close(): void {
    this.ws?.close();
  }
}
