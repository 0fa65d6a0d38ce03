import { polylineChecksum } from "./geometry";
import { TrialRunner } from "./runner";
import { Point, TrialContext } from "./types";

const PAD = 60; // px around the tunnel band

/**
 * Canvas rendering at 1 CSS px = 1 task px (smaller screens letterbox via
 * scrolling containers rather than rescaling, preserving task metrics).
 * The band is stroked directly from the served polyline; nothing is
 * regenerated client-side.
 */
export class RunnerView {
  private readonly g: CanvasRenderingContext2D;
  private offsetY = 0;
  private errorCircles: Point[] = [];
  private current: TrialContext | null = null;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly status: HTMLElement,
    private readonly debug: HTMLElement | null = null,
  ) {
    const g = canvas.getContext("2d");
    if (!g) throw new Error("2d canvas context unavailable");
    this.g = g;
  }

  /** Canvas y for a task-space y (task x maps 1:1 plus left padding). */
  private toCanvas([x, y]: Point): Point {
    return [x + PAD, y - this.offsetY + PAD];
  }

  fromCanvas(cx: number, cy: number): Point {
    return [cx - PAD, cy + this.offsetY - PAD];
  }

  showTrial(ctx: TrialContext): void {
    this.current = ctx;
    this.errorCircles = [];
    const poly = ctx.trial.polyline;
    const ys = poly.map((p) => p[1]);
    this.offsetY = Math.min(...ys) - ctx.trial.width_px;
    const height = Math.max(...ys) - Math.min(...ys) + 2 * ctx.trial.width_px;
    this.canvas.width = ctx.trial.x_max_px + 2 * PAD;
    this.canvas.height = height + 2 * PAD;
    this.redraw();
    const phase = ctx.tutorial ? "tutorial" : "experiment";
    this.status.textContent =
      `${phase}: trial ${ctx.trial.trial_id}` +
      (ctx.flipped ? " (flipped)" : "") +
      ` - click the green disc to start`;
    if (this.debug) {
      this.debug.textContent = `polyline checksum ${polylineChecksum(poly)} (${poly.length} pts)`;
    }
  }

  redraw(): void {
    const ctx = this.current;
    if (!ctx) return;
    const g = this.g;
    const poly = ctx.trial.polyline;
    g.clearRect(0, 0, this.canvas.width, this.canvas.height);

    g.lineJoin = "round";
    g.lineCap = "round";
    g.strokeStyle = "#d8d8d8";
    g.lineWidth = ctx.trial.width_px;
    this.tracePolyline(poly);
    g.stroke();

    g.strokeStyle = "#9a9a9a";
    g.lineWidth = 1;
    this.tracePolyline(poly);
    g.stroke();

    const r = ctx.trial.width_px / 2;
    this.disc(poly[0], r, "#2e9e4f"); // start/end button
    this.disc(poly[poly.length - 1], r, "#c6373c"); // flag button

    g.strokeStyle = "rgba(200, 40, 40, 0.85)";
    g.lineWidth = 2;
    for (const p of this.errorCircles) {
      const [cx, cy] = this.toCanvas(p);
      g.beginPath();
      g.arc(cx, cy, 14, 0, 2 * Math.PI);
      g.stroke();
    }
  }

  private tracePolyline(poly: Point[]): void {
    const g = this.g;
    g.beginPath();
    const [x0, y0] = this.toCanvas(poly[0]);
    g.moveTo(x0, y0);
    for (let i = 1; i < poly.length; i++) {
      const [x, y] = this.toCanvas(poly[i]);
      g.lineTo(x, y);
    }
  }

  private disc(p: Point, r: number, color: string): void {
    const [cx, cy] = this.toCanvas(p);
    this.g.fillStyle = color;
    this.g.beginPath();
    this.g.arc(cx, cy, r, 0, 2 * Math.PI);
    this.g.fill();
  }

  addErrorCircle(p: Point): void {
    this.errorCircles.push(p);
    this.redraw();
  }

  showBreak(remainingMs: number): void {
    this.status.textContent = `break - next block in ${Math.ceil(remainingMs / 1000)} s`;
  }

  showMessage(text: string): void {
    this.status.textContent = text;
  }

  /** Wire live pointer events into a runner; returns an unbind function.
   * Raw movement samples are captured at the native event rate with
   * millisecond timestamps; OS pointer acceleration must be disabled by the
   * operator (checklist item), the runner does not try to compensate. */
  bindPointer(runner: TrialRunner): () => void {
    const toTask = (ev: PointerEvent): Point => {
      const rect = this.canvas.getBoundingClientRect();
      return this.fromCanvas(ev.clientX - rect.left, ev.clientY - rect.top);
    };
    const onMove = (ev: PointerEvent) => {
      const [x, y] = toTask(ev);
      runner.pointerMove(performance.now(), x, y);
    };
    const onDown = (ev: PointerEvent) => {
      const [x, y] = toTask(ev);
      runner.click(performance.now(), x, y);
    };
    this.canvas.addEventListener("pointermove", onMove);
    this.canvas.addEventListener("pointerdown", onDown);
    return () => {
      this.canvas.removeEventListener("pointermove", onMove);
      this.canvas.removeEventListener("pointerdown", onDown);
    };
  }
}
