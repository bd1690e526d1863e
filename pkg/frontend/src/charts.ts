// Hand-rolled canvas strip charts: no chart library, just rolling series.

import { StateMsg } from "./protocol.js";

const COLORS = ["#4fc3f7", "#ffb74d", "#e57373"];

interface Series {
  values: (number | null)[];
  color: string;
  label: string;
}

function drawStrip(
  ctx: CanvasRenderingContext2D,
  w: number,
  h: number,
  series: Series[],
  bands?: { lo: number[]; hi: number[] },
  zeroLine = true
): void {
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s.values) {
      if (v === null) continue;
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (bands) {
    lo = Math.min(lo, ...bands.lo);
    hi = Math.max(hi, ...bands.hi);
  }
  if (!isFinite(lo) || !isFinite(hi)) return;
  if (hi - lo < 1e-9) {
    hi += 1;
    lo -= 1;
  }
  const pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  const y = (v: number) => h - ((v - lo) / (hi - lo)) * h;
  const n = Math.max(...series.map((s) => s.values.length), 2);
  const x = (i: number) => (i / (n - 1)) * w;

  if (bands) {
    ctx.fillStyle = "rgba(120,144,156,0.18)";
    for (let b = 0; b < bands.lo.length; b++) {
      ctx.fillRect(0, y(bands.hi[b]), w, Math.max(1, y(bands.lo[b]) - y(bands.hi[b])));
    }
  }
  if (zeroLine && lo < 0 && hi > 0) {
    ctx.strokeStyle = "#37474f";
    ctx.beginPath();
    ctx.moveTo(0, y(0));
    ctx.lineTo(w, y(0));
    ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    let pen = false;
    s.values.forEach((v, i) => {
      if (v === null) {
        pen = false;
        return;
      }
      if (!pen) {
        ctx.moveTo(x(i), y(v));
        pen = true;
      } else {
        ctx.lineTo(x(i), y(v));
      }
    });
    ctx.stroke();
  }
  // legend
  ctx.font = "10px monospace";
  series.forEach((s, k) => {
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, 6 + 70 * k, 12);
  });
}

export class StripCharts {
  constructor(
    private forceCanvas: HTMLCanvasElement,
    private dyCanvas: HTMLCanvasElement,
    private tauCanvas: HTMLCanvasElement
  ) {}

  render(states: StateMsg[], axisLabels: string[]): void {
    if (states.length === 0) return;
    const fctx = this.forceCanvas.getContext("2d")!;
    drawStrip(fctx, this.forceCanvas.width, this.forceCanvas.height, [
      { values: states.map((s) => s.f_cmd), color: "#aed581", label: "f_cmd" },
      { values: states.map((s) => s.f_meas), color: "#4db6ac", label: "f_meas" },
    ]);

    const last = states[states.length - 1];
    const dctx = this.dyCanvas.getContext("2d")!;
    drawStrip(
      dctx,
      this.dyCanvas.width,
      this.dyCanvas.height,
      last.dy.map((_, j) => ({
        values: states.map((s) => (s.seg === last.seg ? s.dy[j] : null)),
        color: COLORS[j % COLORS.length],
        label: `dy ${axisLabels[j] ?? j}`,
      })),
      {
        lo: last.sbar.map((b) => -b),
        hi: last.sbar.map((b) => b),
      }
    );

    const tctx = this.tauCanvas.getContext("2d")!;
    drawStrip(tctx, this.tauCanvas.width, this.tauCanvas.height, [
      {
        values: states.map((s) => (s.tau === null ? null : Math.max(-5, Math.min(5, s.tau)))),
        color: "#ba68c8",
        label: "tau",
      },
    ]);
  }
}
