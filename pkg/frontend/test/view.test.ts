import { describe, expect, it } from "vitest";

import { HelloMsg, StateMsg } from "../src/protocol.js";
import { ViewState } from "../src/view.js";

function state(tick: number, over: Partial<StateMsg> = {}): StateMsg {
  return {
    type: "state",
    v: 1,
    t: tick * 0.004,
    tick,
    seg: "draw",
    mode: "hybrid_surface",
    s: 0.9,
    progress: 0.1,
    tau: 1.0,
    dir: "forward",
    hold: 0,
    xn: [0.5, 0.5, 5.0],
    dy: [0.001, 0, 0.2],
    xc: [0.501, 0.5, 5.2],
    u: [0.2, 0, -0.1],
    pos: [0.1, 0.2, 0.0],
    q: [1, 0, 0, 0],
    f_meas: 5.1,
    f_cmd: 5.2,
    contact: 1,
    sat: 0,
    sbar: [0.02, 0.02, 3.0],
    channels: ["u", "v", "f_n"],
    frame: ["u", "v", "f_n"],
    ...over,
  };
}

const hello: HelloMsg = {
  type: "hello",
  v: 1,
  scenario: "mini",
  dt: 0.004,
  pace: 1,
  device_range_m: 0.05,
  segments: {},
  scene: { surfaces: [], markers: [], nominal_paths: [] },
};

describe("ViewState", () => {
  it("tracks hello and live states", () => {
    const vs = new ViewState();
    vs.apply(hello, 0);
    expect(vs.connection).toBe("live");
    vs.apply(state(1), 0.1);
    expect(vs.last?.tick).toBe(1);
    expect(vs.history.length).toBe(1);
  });

  it("bounds the history ring", () => {
    const vs = new ViewState(16);
    for (let k = 0; k < 100; k++) vs.apply(state(k), k * 0.01);
    expect(vs.history.length).toBe(16);
    expect(vs.history.toArray()[0].tick).toBe(84);
  });

  it("merges history replies without duplicating the future", () => {
    const vs = new ViewState();
    vs.apply(state(10), 0);
    vs.apply(
      { type: "history", v: 1, states: [state(3), state(5), state(12)] },
      0.1
    );
    const ticks = vs.history.toArray().map((s) => s.tick);
    expect(ticks).toContain(3);
    expect(ticks).toContain(5);
    expect(ticks).not.toContain(12); // newer than live: dropped
  });

  it("flags staleness and recovers", () => {
    const vs = new ViewState();
    vs.apply(hello, 0);
    vs.apply(state(1), 0);
    vs.refreshStaleness(2.0);
    expect(vs.connection).toBe("stale");
    vs.apply(state(2), 2.1);
    expect(vs.connection).toBe("live");
  });

  it("version mismatch is terminal", () => {
    const vs = new ViewState();
    vs.markVersionMismatch();
    vs.markClosed();
    expect(vs.connection).toBe("version-mismatch");
  });

  it("end message is remembered", () => {
    const vs = new ViewState();
    vs.apply({ type: "end", v: 1, reason: "plan_exhausted", t_total: 3, t_input: 1 }, 0);
    expect(vs.connection).toBe("ended");
    expect(vs.endReason).toBe("plan_exhausted");
  });

  it("checks corrections against their bands", () => {
    const vs = new ViewState();
    vs.apply(state(1), 0);
    expect(vs.correctionWithinBounds()).toBe(true);
    vs.apply(state(2, { dy: [0.05, 0, 0] }), 0.1); // beyond sbar[0]=0.02
    expect(vs.correctionWithinBounds()).toBe(false);
  });

  it("axis labels come from the server frame, never hardcoded", () => {
    const vs = new ViewState();
    expect(vs.axisLabels()).toEqual(["x", "y", "z"]); // placeholder before data
    vs.apply(state(1, { frame: ["u", "v", "f_n"] }), 0);
    expect(vs.axisLabels()).toEqual(["u", "v", "f_n"]);
  });

  it("collects error frames, bounded", () => {
    const vs = new ViewState();
    for (let k = 0; k < 30; k++) vs.apply({ type: "error", v: 1, msg: `e${k}` }, 0);
    expect(vs.errors.length).toBe(20);
    expect(vs.errors[19]).toBe("e29");
  });
});
