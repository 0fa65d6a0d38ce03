// Scripted synthetic pointer: drives a TrialRunner along the served polyline
// with fabricated timestamps.  Used by the headless e2e suite and for
// operator smoke checks; it shares every code path with the live runner
// except the event source.

import { arcLengths, pointAt } from "./geometry";
import { TrialRunner } from "./runner";
import { TrialContext } from "./types";

export interface ScriptProfile {
  /** Cursor speed for a given running trial index, px/ms. */
  speedFor(trialIndex: number): number;
  /** Sample interval in ms (>= 60 Hz means <= 16.7). */
  sampleIntervalMs: number;
  /** Optional lateral spike: pushes the cursor out of the tunnel mid-leg. */
  exitSpikePx?: number;
}

/** Steady centerline sweep: consistent speed, never leaves the tunnel. */
export function goodProfile(speed = 0.25): ScriptProfile {
  return { speedFor: () => speed, sampleIntervalMs: 8 };
}

/** Erratic participant: speed alternates trial to trial (coefficient of
 * variation far above the tutorial gate) and every leg spikes out of the
 * tunnel, so the pass criterion is never met. */
export function badProfile(): ScriptProfile {
  return {
    speedFor: (i) => (i % 2 === 0 ? 0.1 : 0.4),
    sampleIntervalMs: 8,
    exitSpikePx: 3 * 50,
  };
}

/** Run one scripted trial to completion and return the trajlog payload. */
export function runScriptedTrial(ctx: TrialContext, profile: ScriptProfile): string {
  const runner = new TrialRunner(ctx);
  const poly = ctx.trial.polyline;
  const s = arcLengths(poly);
  const length = s[s.length - 1];
  const speed = profile.speedFor(ctx.trialIndex);
  const dt = profile.sampleIntervalMs;

  let t = 0;
  const [sx, sy] = poly[0];
  runner.click(t, sx, sy);

  const legSamples = Math.ceil(length / speed / dt);
  const spikeAt = Math.floor(legSamples / 3);
  const spikeLen = Math.max(3, Math.floor(legSamples / 40));

  for (const backward of [false, true]) {
    for (let i = 1; i <= legSamples; i++) {
      t += dt;
      const at = Math.min(i * speed * dt, length);
      const [x, y] = pointAt(poly, s, backward ? length - at : at);
      let yy = y;
      if (profile.exitSpikePx && i >= spikeAt && i < spikeAt + spikeLen) {
        yy += profile.exitSpikePx;
      }
      runner.pointerMove(t, x, yy);
    }
    t += dt;
    const target = backward ? poly[0] : poly[poly.length - 1];
    runner.click(t, target[0], target[1]);
  }
  return runner.toTrajlog();
}
