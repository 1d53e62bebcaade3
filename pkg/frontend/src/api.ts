/** Typed client over the service HTTP API. */

import type {
  RankingReport,
  RecipeListing,
  RunEvent,
  RunSnapshot,
  SessionView,
  TreeDocument,
  TreeNodeView,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getTree(): Promise<TreeDocument> {
    return this.request("GET", "/tree");
  }

  getTreeNode(nodeId: string): Promise<TreeNodeView> {
    return this.request("GET", `/tree/${nodeId}`);
  }

  retrieve(description: string, userAddedIds: string[] = []): Promise<SessionView> {
    return this.request("POST", "/retrieve", {
      description,
      user_added_ids: userAddedIds,
    });
  }

  confirmShortlist(taskId: string, add: string[]): Promise<SessionView> {
    return this.request("POST", `/shortlist/${taskId}/confirm`, { add });
  }

  generatePlans(taskId: string): Promise<SessionView> {
    return this.request("POST", "/plans", { task_id: taskId });
  }

  selectPlan(taskId: string, planId: string): Promise<SessionView> {
    return this.request("POST", `/plans/${taskId}/select`, { plan_id: planId });
  }

  createRun(taskId: string): Promise<{ run_id: string; task_id: string; stage: string }> {
    return this.request("POST", "/runs", { task_id: taskId });
  }

  getRun(runId: string): Promise<RunSnapshot> {
    return this.request("GET", `/runs/${runId}`);
  }

  consent(taskId: string, accept: boolean): Promise<SessionView> {
    return this.request("POST", `/runs/${taskId}/consent`, { accept });
  }

  getRecipes(): Promise<RecipeListing> {
    return this.request("GET", "/recipes");
  }

  getRankings(): Promise<RankingReport> {
    return this.request("GET", "/rankings");
  }

  /** Open the newline-delimited JSON event stream for a run. */
  async *streamRunEvents(runId: string): AsyncGenerator<RunEvent> {
    const response = await this.fetchImpl(`${this.baseUrl}/runs/${runId}/events`, {
      method: "GET",
    });
    if (!response.ok || response.body === null) {
      throw new ApiError(response.status, "event stream unavailable");
    }
    yield* parseNdjson(response.body);
  }
}

/** Decode an NDJSON byte stream into one object per line. */
export async function* parseNdjson(body: ReadableStream<Uint8Array>): AsyncGenerator<RunEvent> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let newline: number;
      while ((newline = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) yield JSON.parse(line) as RunEvent;
      }
    }
    const tail = buffer.trim();
    if (tail) yield JSON.parse(tail) as RunEvent;
  } finally {
    reader.releaseLock();
  }
}
