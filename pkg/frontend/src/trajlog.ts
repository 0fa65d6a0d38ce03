// trajlog v1 writer: header line with the session metadata, then one
// `t_ms,x,y[,event]` record per sample, all comma-separated UTF-8.

export type ClickEvent = "start_click" | "flag_click" | "end_click";

export interface LogHeader {
  sessionId: string;
  participantId: string;
  trialId: string;
  repetition: number;
  flipped: boolean;
}

interface Sample {
  t: number;
  x: number;
  y: number;
  event?: string;
}

export class TrialRecorder {
  private samples: Sample[] = [];

  get count(): number {
    return this.samples.length;
  }

  get lastTime(): number {
    return this.samples.length ? this.samples[this.samples.length - 1].t : -Infinity;
  }

  /** Record one pointer sample; timestamps must strictly increase, so stale
   * or duplicate event timestamps are dropped unless they carry an event
   * (events nudge forward instead, keeping the protocol marks). */
  add(t: number, x: number, y: number, event?: string): void {
    if (t <= this.lastTime) {
      if (event === undefined) return;
      t = this.lastTime + 0.001;
    }
    this.samples.push({ t, x, y, event });
  }

  toText(header: LogHeader): string {
    const lines = [
      `trajlog v1,session_id=${header.sessionId},participant_id=${header.participantId},` +
        `trial_id=${header.trialId},repetition=${header.repetition},` +
        `flipped=${header.flipped ? "true" : "false"}`,
    ];
    for (const s of this.samples) {
      let rec = `${s.t.toFixed(6)},${s.x.toFixed(6)},${s.y.toFixed(6)}`;
      if (s.event) rec += `,${s.event}`;
      lines.push(rec);
    }
    return lines.join("\n") + "\n";
  }
}
