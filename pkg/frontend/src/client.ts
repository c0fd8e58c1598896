// Thin /api/v1 client with a single-poll-loop helper.

import type { GenerationRequest, JobSnapshot } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
    public detail?: unknown,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = fetch.bind(globalThis),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<any> {
    const resp = await this.fetchFn(`${this.base}/api/v1${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      throw new ApiError(
        `${init?.method ?? "GET"} ${path} failed with ${resp.status}`,
        resp.status,
        body,
      );
    }
    return body;
  }

  async health(): Promise<{ status: string; model_loaded: boolean }> {
    return this.request("/health");
  }

  async modelInfo(): Promise<any> {
    return this.request("/model");
  }

  async submitJob(request: GenerationRequest): Promise<string> {
    const body = await this.request("/jobs", {
      method: "POST",
      body: JSON.stringify(request),
    });
    return body.id;
  }

  async pollJob(id: string): Promise<JobSnapshot> {
    return this.request(`/jobs/${id}`);
  }

  async cancelJob(id: string): Promise<JobSnapshot> {
    return this.request(`/jobs/${id}`, { method: "DELETE" });
  }

  /** Poll until the job is terminal; one loop per job. */
  async pollUntilDone(
    id: string,
    opts: {
      intervalMs?: number;
      timeoutMs?: number;
      onUpdate?: (snap: JobSnapshot) => void;
    } = {},
  ): Promise<JobSnapshot> {
    const interval = opts.intervalMs ?? 250;
    const deadline = Date.now() + (opts.timeoutMs ?? 600_000);
    for (;;) {
      const snap = await this.pollJob(id);
      opts.onUpdate?.(snap);
      if (snap.status === "done" || snap.status === "error" || snap.status === "cancelled") {
        return snap;
      }
      if (Date.now() > deadline) {
        throw new ApiError(`job ${id} timed out while polling`, 0);
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
