import { distanceToPolyline } from "./geometry";
import { TrialRecorder } from "./trajlog";
import { Point, TrialContext } from "./types";

export type TrialPhase = "await_start" | "steer_out" | "steer_back" | "complete";

export interface RunnerHooks {
  /** Cursor left the tunnel band (tutorial error circles). */
  onExit?(p: Point): void;
  onPhase?(phase: TrialPhase): void;
}

/**
 * Protocol state machine for one trial: click start, steer to the far end,
 * click the flag, steer back, click end.  It consumes raw pointer samples
 * (from real events or a script) and produces the trajlog v1 payload.
 *
 * The tunnel geometry is exactly the served polyline; the runner never
 * recomputes or regenerates it, and never derives measures.
 */
export class TrialRunner {
  readonly recorder = new TrialRecorder();
  private phase: TrialPhase = "await_start";
  private wasInside = true;
  private readonly poly: Point[];
  private readonly width: number;
  private readonly start: Point;
  private readonly flag: Point;

  constructor(
    readonly ctx: TrialContext,
    private readonly hooks: RunnerHooks = {},
  ) {
    this.poly = ctx.trial.polyline;
    this.width = ctx.trial.width_px;
    this.start = this.poly[0];
    this.flag = this.poly[this.poly.length - 1];
  }

  get currentPhase(): TrialPhase {
    return this.phase;
  }

  get buttonRadius(): number {
    return this.width / 2;
  }

  private near(p: Point, target: Point): boolean {
    return Math.hypot(p[0] - target[0], p[1] - target[1]) <= this.buttonRadius;
  }

  private setPhase(phase: TrialPhase): void {
    this.phase = phase;
    this.hooks.onPhase?.(phase);
  }

  /** Raw pointer movement; recorded only while the trial clock is running. */
  pointerMove(t: number, x: number, y: number): void {
    if (this.phase === "await_start" || this.phase === "complete") return;
    this.recorder.add(t, x, y);
    if (this.ctx.tutorial && this.hooks.onExit) {
      const inTunnel =
        distanceToPolyline(this.poly, [x, y]) <= this.width / 2 ||
        this.near([x, y], this.start) ||
        Math.hypot(x - this.flag[0], y - this.flag[1]) <= this.width;
      if (this.wasInside && !inTunnel) this.hooks.onExit([x, y]);
      this.wasInside = inTunnel;
    }
  }

  /** Pointer click; returns true when the click advanced the protocol. */
  click(t: number, x: number, y: number): boolean {
    const p: Point = [x, y];
    if (this.phase === "await_start" && this.near(p, this.start)) {
      this.recorder.add(t, x, y, "start_click");
      this.setPhase("steer_out");
      return true;
    }
    if (this.phase === "steer_out" && this.near(p, this.flag)) {
      this.recorder.add(t, x, y, "flag_click");
      this.setPhase("steer_back");
      return true;
    }
    if (this.phase === "steer_back" && this.near(p, this.start)) {
      this.recorder.add(t, x, y, "end_click");
      this.setPhase("complete");
      return true;
    }
    return false;
  }

  get complete(): boolean {
    return this.phase === "complete";
  }

  toTrajlog(): string {
    if (!this.complete) throw new Error("trial is not complete");
    return this.recorder.toText({
      sessionId: this.ctx.sessionId,
      participantId: this.ctx.participantId,
      trialId: this.ctx.trial.trial_id,
      repetition: this.ctx.repetition,
      flipped: this.ctx.flipped,
    });
  }
}
