// Thin typed wrappers over the mission service REST endpoints. Every mutation
// the console performs goes through these; there are no side channels.

import type { GridCells, MissionReport, Snapshot, Vec3 } from "./types.js";

export type FetchFn = typeof fetch;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const reason = (body as { error?: string }).error ?? resp.statusText;
    throw new ApiError(resp.status, reason);
  }
  return body as T;
}

export class MissionApi {
  constructor(readonly baseUrl: string, private readonly fetchFn: FetchFn = fetch) {}

  state(): Promise<Snapshot> {
    return this.fetchFn(`${this.baseUrl}/state`).then((r) => asJson<Snapshot>(r));
  }

  grid(): Promise<GridCells> {
    return this.fetchFn(`${this.baseUrl}/grid`).then((r) => asJson<GridCells>(r));
  }

  report(): Promise<MissionReport> {
    return this.fetchFn(`${this.baseUrl}/report`).then((r) => asJson<MissionReport>(r));
  }

  async addTask(location: Vec3, kind = "inspect"): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/tasks`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, location }),
    });
    const body = await asJson<{ task: string }>(resp);
    return body.task;
  }

  async control(action: "start" | "pause" | "resume"): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/control`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ action }),
    });
    const body = await asJson<{ status: string }>(resp);
    return body.status;
  }
}
