// Composition root: wiring input capture, the wire client, and the views.

import { StripCharts } from "./charts.js";
import { gamepadToAxes, InputState, LatencyMeter, SendGate } from "./input.js";
import { Client } from "./net.js";
import { inputFrame } from "./protocol.js";
import { SceneView } from "./scene.js";
import { ViewState } from "./view.js";

const nowS = () => performance.now() / 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const view = new ViewState();
  const input = new InputState();
  const gate = new SendGate(40);
  const latency = new LatencyMeter();

  const banner = el<HTMLDivElement>("banner");
  const status = el<HTMLSpanElement>("status");
  const tauReadout = el<HTMLSpanElement>("tau");
  const latReadout = el<HTMLSpanElement>("latency");
  const axisLabels = el<HTMLDivElement>("axis-labels");
  const scene = new SceneView(el<HTMLCanvasElement>("scene"));
  const charts = new StripCharts(
    el<HTMLCanvasElement>("chart-force"),
    el<HTMLCanvasElement>("chart-dy"),
    el<HTMLCanvasElement>("chart-tau")
  );

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const client = new Client(`${proto}://${location.host}/ws`, {
    onMessage: (msg) => {
      view.apply(msg, nowS());
      if (msg.type === "hello") scene.setScene(msg.scene);
    },
    onVersionMismatch: (err) => {
      view.markVersionMismatch();
      banner.textContent = `incompatible server: ${err} - input disabled`;
      banner.classList.add("error");
    },
    onClose: () => view.markClosed(),
    onOpen: () => {
      banner.classList.remove("error");
      banner.textContent = "";
    },
  });
  client.connect();

  // --- input capture: drag pad + wheel/keys, gamepad preferred when present
  const pad = el<HTMLDivElement>("pad");
  const knob = el<HTMLDivElement>("knob");
  let dragging = false;

  const padVec = (ev: PointerEvent): [number, number] => {
    const r = pad.getBoundingClientRect();
    const x = ((ev.clientX - r.left) / r.width) * 2 - 1;
    const y = -(((ev.clientY - r.top) / r.height) * 2 - 1);
    return [x, y];
  };
  pad.addEventListener("pointerdown", (ev) => {
    dragging = true;
    pad.setPointerCapture(ev.pointerId);
    const [x, y] = padVec(ev);
    input.setPad(x, y, nowS());
  });
  pad.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const [x, y] = padVec(ev);
    input.setPad(x, y, nowS());
  });
  const release = () => {
    dragging = false;
    input.releasePad(nowS());
  };
  pad.addEventListener("pointerup", release);
  pad.addEventListener("pointercancel", release);
  pad.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    input.addWheel(-Math.sign(ev.deltaY) * 0.25, nowS());
  });
  const keyAxis = (ev: KeyboardEvent, down: boolean) => {
    if (ev.key === "w" || ev.key === "ArrowUp") input.setKeyAxis(down ? 1 : 0, nowS());
    if (ev.key === "s" || ev.key === "ArrowDown") input.setKeyAxis(down ? -1 : 0, nowS());
  };
  window.addEventListener("keydown", (ev) => keyAxis(ev, true));
  window.addEventListener("keyup", (ev) => keyAxis(ev, false));

  // --- send loop: >= 30 Hz while deflected, one exact zero on release
  let seq = 0;
  setInterval(() => {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const gp = pads && pads[0];
    input.setGamepad(gp ? gamepadToAxes([...gp.axes], [...gp.buttons]) : null, nowS());

    const snap = input.sample(nowS());
    if (gate.shouldSend(snap.u, nowS())) {
      seq += 1;
      if (client.send(inputFrame(snap.u, seq))) {
        latency.record(snap.capturedAt, nowS());
      }
    }
    // knob feedback
    knob.style.left = `${50 + snap.u[0] * 40}%`;
    knob.style.top = `${50 - snap.u[1] * 40}%`;
  }, 25);

  // --- render loop (never blocks input dispatch)
  let lastSatTick = -1e9;
  const render = () => {
    view.refreshStaleness(nowS());
    status.textContent = view.connection;
    status.className = `badge ${view.connection}`;
    const states = view.history.toArray();
    const last = view.last;
    if (last) {
      tauReadout.textContent = last.tau === null ? "hold" : last.tau.toFixed(2);
      tauReadout.classList.toggle("reversed", last.tau !== null && last.tau < 0);
      if (last.sat !== 0) lastSatTick = last.tick;
      axisLabels.textContent = `device axes -> ${view.axisLabels().join(" / ")}`;
    }
    const med = latency.medianMs();
    latReadout.textContent = med === null ? "-" : `${med.toFixed(1)} ms`;
    scene.render(states, last, last !== null && last.tick - lastSatTick < 30);
    charts.render(states, view.axisLabels());
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

main();
