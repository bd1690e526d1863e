// Top-down (x, y) trajectory view: surface outlines, nominal vs corrected
// paths, the live tool point, and injected-error markers.

import { Scene, StateMsg } from "./protocol.js";

export class SceneView {
  private bounds: { x0: number; x1: number; y0: number; y1: number } | null = null;

  constructor(private canvas: HTMLCanvasElement) {}

  setScene(scene: Scene): void {
    let x0 = Infinity, x1 = -Infinity, y0 = Infinity, y1 = -Infinity;
    const eat = (p: number[]) => {
      x0 = Math.min(x0, p[0]); x1 = Math.max(x1, p[0]);
      y0 = Math.min(y0, p[1]); y1 = Math.max(y1, p[1]);
    };
    scene.surfaces.forEach((s) => s.outline.forEach(eat));
    scene.nominal_paths.forEach((p) => p.points.forEach(eat));
    scene.markers.forEach((m) => {
      if (m.polygon) m.polygon.forEach(eat);
      if (m.point) eat(m.point);
    });
    if (!isFinite(x0)) return;
    const mx = 0.08 * (x1 - x0 || 1);
    const my = 0.08 * (y1 - y0 || 1);
    this.bounds = { x0: x0 - mx, x1: x1 + mx, y0: y0 - my, y1: y1 + my };
    this.scene = scene;
  }

  private scene: Scene | null = null;

  private toPx(p: number[]): [number, number] {
    const b = this.bounds!;
    const w = this.canvas.width;
    const h = this.canvas.height;
    // uniform scale, y up
    const scale = Math.min(w / (b.x1 - b.x0), h / (b.y1 - b.y0));
    const cx = (b.x0 + b.x1) / 2;
    const cy = (b.y0 + b.y1) / 2;
    return [w / 2 + (p[0] - cx) * scale, h / 2 - (p[1] - cy) * scale];
  }

  render(history: StateMsg[], last: StateMsg | null, satFlash: boolean): void {
    const ctx = this.canvas.getContext("2d")!;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    if (!this.bounds || !this.scene) return;

    for (const surf of this.scene.surfaces) {
      ctx.strokeStyle = "#546e7a";
      ctx.beginPath();
      surf.outline.forEach((p, i) => {
        const [x, y] = this.toPx(p);
        i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
      });
      ctx.closePath();
      ctx.stroke();
    }
    for (const m of this.scene.markers) {
      if (m.polygon) {
        ctx.fillStyle = "rgba(229,115,115,0.25)";
        ctx.beginPath();
        m.polygon.forEach((p, i) => {
          const [x, y] = this.toPx(p);
          i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
        });
        ctx.closePath();
        ctx.fill();
      } else if (m.point) {
        const [x, y] = this.toPx(m.point);
        ctx.strokeStyle = "#e57373";
        ctx.beginPath();
        ctx.moveTo(x - 5, y);
        ctx.lineTo(x + 5, y);
        ctx.moveTo(x, y - 5);
        ctx.lineTo(x, y + 5);
        ctx.stroke();
      }
    }
    ctx.strokeStyle = "#455a64";
    ctx.setLineDash([3, 3]);
    for (const path of this.scene.nominal_paths) {
      ctx.beginPath();
      path.points.forEach((p, i) => {
        const [x, y] = this.toPx(p);
        i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
      });
      ctx.stroke();
    }
    ctx.setLineDash([]);

    // executed (corrected) path
    ctx.strokeStyle = "#4fc3f7";
    ctx.lineWidth = 1.6;
    ctx.beginPath();
    history.forEach((s, i) => {
      const [x, y] = this.toPx(s.pos);
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.lineWidth = 1;

    if (last) {
      const [x, y] = this.toPx(last.pos);
      ctx.fillStyle = last.contact ? "#ffd54f" : "#4fc3f7";
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.fill();
      if (last.tau !== null && last.tau < 0) {
        ctx.strokeStyle = "#ba68c8"; // reversing: highlight the marker
        ctx.beginPath();
        ctx.arc(x, y, 9, 0, 2 * Math.PI);
        ctx.stroke();
      }
    }
    if (satFlash) {
      ctx.strokeStyle = "#ff8a65";
      ctx.lineWidth = 4;
      ctx.strokeRect(2, 2, w - 4, h - 4);
      ctx.lineWidth = 1;
    }
  }
}
