// Client-side view of the running session: latest message, bounded history,
// connection status. Rendering reads this; it never blocks input dispatch.

import { HelloMsg, ServerMsg, StateMsg } from "./protocol.js";
import { Ring } from "./ring.js";

export type Connection =
  | "connecting"
  | "live"
  | "stale"
  | "ended"
  | "closed"
  | "version-mismatch";

export const STALE_AFTER_S = 1.0;

export class ViewState {
  hello: HelloMsg | null = null;
  last: StateMsg | null = null;
  history: Ring<StateMsg>;
  connection: Connection = "connecting";
  endReason = "";
  errors: string[] = [];
  lastArrivalMonotonic = 0;

  constructor(capacity = 1800) {
    this.history = new Ring<StateMsg>(capacity);
  }

  apply(msg: ServerMsg, nowMonotonic: number): void {
    switch (msg.type) {
      case "hello":
        this.hello = msg;
        this.connection = "live";
        break;
      case "state":
        this.last = msg;
        this.history.push(msg);
        this.lastArrivalMonotonic = nowMonotonic;
        if (this.connection === "stale" || this.connection === "connecting") {
          this.connection = "live";
        }
        break;
      case "history":
        // replayed decimated states reconstruct the strip charts after a
        // reconnect; merge in arrival order, dropping anything newer already
        for (const st of msg.states) {
          if (!this.last || st.tick <= this.last.tick) this.history.push(st);
        }
        break;
      case "end":
        this.connection = "ended";
        this.endReason = msg.reason;
        break;
      case "error":
        this.errors.push(msg.msg);
        if (this.errors.length > 20) this.errors.shift();
        break;
    }
  }

  markVersionMismatch(): void {
    this.connection = "version-mismatch";
  }

  markClosed(): void {
    if (this.connection !== "ended" && this.connection !== "version-mismatch") {
      this.connection = "closed";
    }
  }

  refreshStaleness(nowMonotonic: number): void {
    if (
      this.connection === "live" &&
      nowMonotonic - this.lastArrivalMonotonic > STALE_AFTER_S
    ) {
      this.connection = "stale";
    }
  }

  /** Scaled corrections must stay inside their +/- s_bar bands. */
  correctionWithinBounds(eps = 1e-9): boolean {
    for (const st of this.history.toArray()) {
      for (let i = 0; i < st.dy.length; i++) {
        if (Math.abs(st.dy[i]) > st.sbar[i] + eps) return false;
      }
    }
    return true;
  }

  axisLabels(): string[] {
    // always the server-reported correction frame, never a hardcoded guess
    return this.last?.frame ?? ["x", "y", "z"];
  }
}
