/** Live run view: consumes the event stream append-only, colors nodes,
 * and resubscribes with backoff when the stream drops. */

import type { ApiClient } from "./api.js";
import type { NodeStatus, PlanDocument, RunEvent } from "./types.js";

export const STATUS_COLORS: Record<NodeStatus, string> = {
  pending: "gray",
  running: "blue",
  succeeded: "green",
  failed: "red",
  skipped: "amber",
};

export interface NodeView {
  sub_id: string;
  status: NodeStatus;
  color: string;
  layer: number;
}

export class RunMonitor {
  readonly events: RunEvent[] = [];
  private statuses = new Map<string, NodeStatus>();
  overall: "running" | "succeeded" | "failed" | "pending" = "pending";

  constructor(private plan: PlanDocument) {
    for (const node of plan.nodes) this.statuses.set(node.sub_id, "pending");
  }

  /** Append one event; the log is never reordered. */
  apply(event: RunEvent): void {
    this.events.push(event);
    if (event.sub_id === null) {
      this.overall = event.status as RunMonitor["overall"];
    } else if (this.statuses.has(event.sub_id)) {
      this.statuses.set(event.sub_id, event.status as NodeStatus);
    }
  }

  nodeViews(): NodeView[] {
    return this.plan.nodes.map((node) => {
      const status = this.statuses.get(node.sub_id) ?? "pending";
      return {
        sub_id: node.sub_id,
        status,
        color: STATUS_COLORS[status],
        layer: node.layer,
      };
    });
  }

  statusOf(subId: string): NodeStatus {
    return this.statuses.get(subId) ?? "pending";
  }

  /** Index of the first event putting a node into a given status, or -1. */
  eventIndex(subId: string | null, status: string): number {
    return this.events.findIndex((e) => e.sub_id === subId && e.status === status);
  }

  terminalBanner(): string | null {
    if (this.overall === "succeeded") return "Run completed successfully";
    if (this.overall === "failed") return "Run finished with failures";
    return null;
  }
}

export interface MonitorOptions {
  maxAttempts?: number;
  baseDelayMs?: number;
  maxDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Follow a run to its terminal state, resubscribing on dropped streams.
 *
 * Each resubscription replays the full event log from the start; already
 * seen events (by index) are skipped so the monitor log stays append-only.
 */
export async function followRun(
  api: Pick<ApiClient, "streamRunEvents">,
  runId: string,
  monitor: RunMonitor,
  options: MonitorOptions = {},
): Promise<void> {
  const maxAttempts = options.maxAttempts ?? 8;
  const baseDelay = options.baseDelayMs ?? 100;
  const maxDelay = options.maxDelayMs ?? 5000;
  const sleep = options.sleep ?? defaultSleep;

  for (let attempt = 0; attempt < maxAttempts; attempt += 1) {
    let cursor = 0;
    try {
      for await (const event of api.streamRunEvents(runId)) {
        if (cursor >= monitor.events.length) {
          monitor.apply(event);
        }
        cursor += 1;
      }
      if (monitor.overall === "succeeded" || monitor.overall === "failed") {
        return;
      }
    } catch {
      // dropped stream: fall through to backoff and resubscribe
    }
    await sleep(Math.min(baseDelay * 2 ** attempt, maxDelay));
  }
  throw new Error(`event stream for ${runId} did not reach a terminal state`);
}
