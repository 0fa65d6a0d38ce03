import { NextPayload, SessionCreated, SessionReport, TrialDocument, UploadResponse } from "./types";

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`service responded ${status}: ${JSON.stringify(detail)}`);
  }
}

export class BreakNotElapsedError extends ServiceError {
  constructor(
    status: number,
    detail: unknown,
    readonly remainingMs: number,
  ) {
    super(status, detail);
  }
}

async function parseBody(resp: Response): Promise<unknown> {
  const text = await resp.text();
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}/api/v1${path}`;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.url(path));
    const body = await parseBody(resp);
    if (!resp.ok) throw new ServiceError(resp.status, body);
    return body as T;
  }

  listTrials(): Promise<TrialDocument[]> {
    return this.get("/trials");
  }

  getTrial(trialId: string): Promise<TrialDocument> {
    return this.get(`/trials/${trialId}`);
  }

  async createSession(participantId: string, seed: number, reversed: boolean): Promise<SessionCreated> {
    const resp = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ participant_id: participantId, seed, reversed }),
    });
    const body = await parseBody(resp);
    if (!resp.ok) throw new ServiceError(resp.status, body);
    return body as SessionCreated;
  }

  next(sessionId: string): Promise<NextPayload> {
    return this.get(`/sessions/${sessionId}/next`);
  }

  report(sessionId: string): Promise<SessionReport> {
    return this.get(`/sessions/${sessionId}/report`);
  }

  /**
   * Upload one trajlog v1 payload.  Network failures retry with the log
   * buffered locally; protocol rejections surface immediately so the
   * operator can see them.
   */
  async uploadLog(sessionId: string, trajlog: string, retries = 3): Promise<UploadResponse> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= retries; attempt++) {
      let resp: Response;
      try {
        resp = await fetch(this.url(`/sessions/${sessionId}/logs`), {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify({ trajlog }),
        });
      } catch (err) {
        lastError = err; // connectivity problem: keep the log and retry
        await new Promise((r) => setTimeout(r, 250 * (attempt + 1)));
        continue;
      }
      const body = await parseBody(resp);
      if (resp.ok) return body as UploadResponse;
      const detail = (body as { detail?: { reason?: string; remaining_ms?: number } }).detail;
      if (resp.status === 409 && detail?.reason === "break_not_elapsed") {
        throw new BreakNotElapsedError(resp.status, detail, detail.remaining_ms ?? 0);
      }
      throw new ServiceError(resp.status, body);
    }
    throw lastError instanceof Error ? lastError : new Error(String(lastError));
  }
}
