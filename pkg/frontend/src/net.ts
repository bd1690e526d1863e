// WebSocket client: reconnect with backoff, version handshake, history replay.

import { historyRequest, parseServerMessage, ServerMsg } from "./protocol.js";

export interface NetCallbacks {
  onMessage(msg: ServerMsg): void;
  onVersionMismatch(error: string): void;
  onClose(): void;
  onOpen(): void;
}

export class Client {
  private ws: WebSocket | null = null;
  private backoffMs = 500;
  private stopped = false;
  blocked = false; // version mismatch: never send input

  constructor(readonly url: string, readonly cb: NetCallbacks) {}

  connect(): void {
    if (this.stopped) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = 500;
      this.cb.onOpen();
      ws.send(historyRequest()); // reconstruct charts after a reconnect
    };
    ws.onmessage = (ev) => {
      const res = parseServerMessage(String(ev.data));
      if (!res.ok) {
        if (res.versionMismatch) {
          this.blocked = true;
          this.cb.onVersionMismatch(res.error);
          ws.close();
        }
        return;
      }
      this.cb.onMessage(res.msg);
    };
    ws.onclose = () => {
      this.ws = null;
      this.cb.onClose();
      if (!this.stopped && !this.blocked) {
        setTimeout(() => this.connect(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, 8000);
      }
    };
  }

  send(frame: string): boolean {
    if (this.blocked || !this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(frame);
    return true;
  }

  stop(): void {
    this.stopped = true;
    this.ws?.close();
  }
}
