// Operator input: pointer-drag pad (2 axes) plus scroll/keys (3rd axis),
// or a gamepad when one is connected. All sources spring back to center on
// release, mimicking a zero-displacement input device.

import { clampAxis, Vec3 } from "./protocol.js";

export const DEFAULT_DEADZONE = 0.06;
export const WHEEL_DECAY_S = 0.25;

export function applyDeadzone(v: number, deadzone: number): number {
  if (Math.abs(v) <= deadzone) return 0;
  // rescale the live range so full deflection still reaches 1
  const sign = v > 0 ? 1 : -1;
  return sign * Math.min(1, (Math.abs(v) - deadzone) / (1 - deadzone));
}

export interface DeviceSnapshot {
  u: Vec3;
  capturedAt: number; // seconds (performance.now()/1000 of the raw event)
}

/** Pure state of the composite input device (DOM events feed it). */
export class InputState {
  private pad: [number, number] = [0, 0];
  private padCapturedAt = 0;
  private keyAxis = 0;
  private wheelImpulse = 0;
  private wheelAt = 0;
  private gamepad: Vec3 | null = null;
  private gamepadAt = 0;

  constructor(readonly deadzone: number = DEFAULT_DEADZONE) {}

  setPad(x: number, y: number, at: number): void {
    this.pad = [clampAxis(x), clampAxis(y)];
    this.padCapturedAt = at;
  }

  releasePad(at: number): void {
    this.pad = [0, 0]; // spring to center
    this.padCapturedAt = at;
  }

  setKeyAxis(value: number, at: number): void {
    this.keyAxis = clampAxis(value);
    this.padCapturedAt = at;
  }

  addWheel(delta: number, at: number): void {
    this.wheelImpulse = clampAxis(this.wheelImpulse * this.wheelFade(at) + delta);
    this.wheelAt = at;
  }

  private wheelFade(now: number): number {
    const dt = Math.max(0, now - this.wheelAt);
    return Math.exp(-dt / WHEEL_DECAY_S);
  }

  /** Gamepad overrides the pointer sources while present. */
  setGamepad(u: Vec3 | null, at: number): void {
    this.gamepad = u ? [clampAxis(u[0]), clampAxis(u[1]), clampAxis(u[2])] : null;
    this.gamepadAt = at;
  }

  sample(now: number): DeviceSnapshot {
    if (this.gamepad) {
      return {
        u: [
          applyDeadzone(this.gamepad[0], this.deadzone),
          applyDeadzone(this.gamepad[1], this.deadzone),
          applyDeadzone(this.gamepad[2], this.deadzone),
        ],
        capturedAt: this.gamepadAt,
      };
    }
    const wheel = this.wheelImpulse * this.wheelFade(now);
    const third = clampAxis(this.keyAxis + wheel);
    return {
      u: [
        applyDeadzone(this.pad[0], this.deadzone),
        applyDeadzone(this.pad[1], this.deadzone),
        Math.abs(third) < 1e-3 ? 0 : third,
      ],
      capturedAt: Math.max(this.padCapturedAt, this.wheelAt),
    };
  }
}

/** Send scheduling: at least minHz while deflected, exactly one zero after release. */
export class SendGate {
  private lastSent = -Infinity;
  private zeroPending = false;

  constructor(readonly minHz: number = 40) {}

  shouldSend(u: Vec3, now: number): boolean {
    const nonzero = u[0] !== 0 || u[1] !== 0 || u[2] !== 0;
    if (nonzero) {
      this.zeroPending = true;
      // small epsilon so timer jitter cannot halve the effective rate
      if (now - this.lastSent >= 1 / this.minHz - 1e-4) {
        this.lastSent = now;
        return true;
      }
      return false;
    }
    if (this.zeroPending) {
      this.zeroPending = false; // the one exact-zero frame on release
      this.lastSent = now;
      return true;
    }
    return false;
  }
}

/** Capture-to-send latency, reported as the running median. */
export class LatencyMeter {
  private samples: number[] = [];

  constructor(readonly capacity: number = 256) {}

  record(capturedAt: number, sentAt: number): void {
    const lat = sentAt - capturedAt;
    if (lat < 0) return;
    this.samples.push(lat);
    if (this.samples.length > this.capacity) this.samples.shift();
  }

  medianMs(): number | null {
    if (this.samples.length === 0) return null;
    const sorted = [...this.samples].sort((a, b) => a - b);
    const mid = Math.floor(sorted.length / 2);
    const median =
      sorted.length % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return median * 1000;
  }
}

/** Map a standard gamepad reading onto the three device axes. */
export function gamepadToAxes(axes: number[], buttons: { value: number }[]): Vec3 {
  const x = axes[0] ?? 0;
  const y = -(axes[1] ?? 0); // stick up = +y
  const press = (buttons[7]?.value ?? 0) - (buttons[6]?.value ?? 0); // RT - LT
  return [clampAxis(x), clampAxis(y), clampAxis(-press)]; // pressing = -z (into surface)
}
