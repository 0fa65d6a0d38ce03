// Wire types for the steerlab session service (all bodies UTF-8 JSON).

export type Point = [number, number];

export interface TrialDocument {
  trial_id: string;
  level_L: number;
  level_K: number;
  width_px: number;
  x_max_px: number;
  flipped: boolean;
  components: number;
  angle_multipliers: number[];
  periods: number;
  amplitude_px: number;
  length_px: number;
  total_curvature: number;
  polyline: Point[];
}

export type Phase = "tutorial" | "experiment" | "break" | "done" | "failed_tutorial";

export interface NextPayload {
  phase: Phase;
  trial?: TrialDocument;
  flipped?: boolean;
  repetition?: number;
  block?: number;
  trial_in_block?: number;
  tutorial_trials_completed?: number;
  break_remaining_ms?: number;
}

export interface TrialMeasures {
  mt_ms: number;
  opm: number;
  v_avg: number;
  exits: number;
  w_e: number;
  path_px: number;
}

export interface UploadResponse {
  measures: TrialMeasures;
  phase: Phase;
  tutorial_decision: "continue" | "pass" | "fail" | null;
  persisted_log: string;
}

export interface SessionCreated {
  session_id: string;
  plan: {
    participant_id: string;
    seed: number;
    order_reversed: boolean;
    blocks: { trial_id: string; flipped: boolean }[][];
  };
}

export interface SessionReport {
  measures: ({ trial_id: string; participant_id: string } & TrialMeasures)[];
  summary: Record<string, { mt_ms: [number, number]; n: number }>;
  fits: unknown;
}

export interface TrialContext {
  trial: TrialDocument;
  flipped: boolean;
  repetition: number;
  sessionId: string;
  participantId: string;
  tutorial: boolean;
  trialIndex: number; // running count across the session, for scripted profiles
}
