import { ApiClient, BreakNotElapsedError } from "./api";
import { NextPayload, Phase, TrialContext, UploadResponse } from "./types";

export interface TrialExecutor {
  /** Run one trial (render + capture, or scripted) and return its trajlog. */
  run(ctx: TrialContext): Promise<string>;
}

export interface SessionHooks {
  onNext?(payload: NextPayload): void;
  onUpload?(resp: UploadResponse): void;
  onBreak?(remainingMs: number): void;
  onTutorialDecision?(decision: string): void;
  sleep?(ms: number): Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export interface SessionOutcome {
  sessionId: string;
  finalPhase: Phase;
  tutorialTrials: number;
  experimentTrials: number;
  uploads: UploadResponse[];
}

/**
 * Drives a whole session against the service: tutorial until pass/fail, then
 * 27 blocks of 5 trials with the service's break gate respected.  The client
 * performs no analytics; every measure in the outcome came from the service.
 */
export class SessionDriver {
  constructor(
    private readonly api: ApiClient,
    private readonly participantId: string,
    private readonly executor: TrialExecutor,
    private readonly hooks: SessionHooks = {},
  ) {}

  async run(seed: number, reversed = false): Promise<SessionOutcome> {
    const session = await this.api.createSession(this.participantId, seed, reversed);
    const sessionId = session.session_id;
    const sleep = this.hooks.sleep ?? defaultSleep;
    const outcome: SessionOutcome = {
      sessionId,
      finalPhase: "tutorial",
      tutorialTrials: 0,
      experimentTrials: 0,
      uploads: [],
    };

    // 30 tutorial trials + 135 experiment trials + 26 breaks, with headroom
    for (let step = 0; step < 400; step++) {
      const payload = await this.api.next(sessionId);
      this.hooks.onNext?.(payload);

      if (payload.phase === "done" || payload.phase === "failed_tutorial") {
        outcome.finalPhase = payload.phase;
        return outcome;
      }
      if (payload.phase === "break") {
        const remaining = payload.break_remaining_ms ?? 0;
        this.hooks.onBreak?.(remaining);
        await sleep(remaining + 5);
        continue;
      }

      const ctx: TrialContext = {
        trial: payload.trial!,
        flipped: payload.flipped!,
        repetition: payload.repetition ?? 0,
        sessionId,
        participantId: this.participantId,
        tutorial: payload.phase === "tutorial",
        trialIndex: outcome.tutorialTrials + outcome.experimentTrials,
      };
      const trajlog = await this.executor.run(ctx);
      let resp: UploadResponse;
      try {
        resp = await this.api.uploadLog(sessionId, trajlog);
      } catch (err) {
        if (err instanceof BreakNotElapsedError) {
          await sleep(err.remainingMs + 5);
          resp = await this.api.uploadLog(sessionId, trajlog);
        } else {
          throw err;
        }
      }
      outcome.uploads.push(resp);
      this.hooks.onUpload?.(resp);
      if (ctx.tutorial) {
        outcome.tutorialTrials++;
        if (resp.tutorial_decision) this.hooks.onTutorialDecision?.(resp.tutorial_decision);
      } else {
        outcome.experimentTrials++;
      }
    }
    throw new Error("session did not terminate within the expected step budget");
  }
}
