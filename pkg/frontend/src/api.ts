/** Thin typed client for the angioforge service HTTP API. */

import type {
  HealthResponse,
  HistoryResponse,
  SessionSummary,
  StepRecord,
} from "./types.js";

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body: keep statusText */
  }
  return new ApiError(resp.status, detail);
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) throw await parseError(resp);
  return (await resp.json()) as T;
}

export class ApiClient {
  baseUrl: string;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async createSession(
    image: Blob,
    config?: Record<string, unknown>,
  ): Promise<SessionSummary> {
    const form = new FormData();
    form.append("image", image, "angiogram.png");
    if (config) form.append("config", JSON.stringify(config));
    const resp = await fetch(this.url("/sessions"), {
      method: "POST",
      body: form,
    });
    return asJson<SessionSummary>(resp);
  }

  async getSession(id: string): Promise<SessionSummary> {
    return asJson<SessionSummary>(await fetch(this.url(`/sessions/${id}`)));
  }

  async advance(id: string): Promise<StepRecord> {
    const resp = await fetch(this.url(`/sessions/${id}/advance`), {
      method: "POST",
    });
    return asJson<StepRecord>(resp);
  }

  async regenerate(
    id: string,
    step: number,
    prompt: string,
  ): Promise<StepRecord> {
    const resp = await fetch(this.url(`/sessions/${id}/steps/${step}/regenerate`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ prompt }),
    });
    return asJson<StepRecord>(resp);
  }

  async accept(
    id: string,
    step: number,
    iteration: number,
  ): Promise<SessionSummary> {
    const resp = await fetch(
      this.url(`/sessions/${id}/steps/${step}/iterations/${iteration}/accept`),
      { method: "POST" },
    );
    return asJson<SessionSummary>(resp);
  }

  async reject(
    id: string,
    step: number,
    iteration: number,
  ): Promise<SessionSummary> {
    const resp = await fetch(
      this.url(`/sessions/${id}/steps/${step}/iterations/${iteration}/reject`),
      { method: "POST" },
    );
    return asJson<SessionSummary>(resp);
  }

  async history(id: string): Promise<HistoryResponse> {
    return asJson<HistoryResponse>(
      await fetch(this.url(`/sessions/${id}/history`)),
    );
  }

  async health(): Promise<HealthResponse> {
    return asJson<HealthResponse>(await fetch(this.url("/healthz")));
  }

  artifactUrl(id: string, hash: string): string {
    return this.url(`/sessions/${id}/artifacts/${hash}`);
  }

  outputUrl(id: string, name: string): string {
    return this.url(`/sessions/${id}/outputs/${name}`);
  }
}
