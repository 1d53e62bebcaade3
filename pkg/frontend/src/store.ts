/** Single client-side store; every update funnels through applySession. */

import type { SessionView, Stage } from "./types.js";

export interface ConsoleState {
  session: SessionView | null;
  runId: string | null;
  error: string | null;
}

type Listener = (state: ConsoleState) => void;

const STAGE_ORDER: Stage[] = [
  "retrieved",
  "shortlist_confirmed",
  "plans_ready",
  "plan_selected",
  "running",
  "done",
];

export function stageIndex(stage: Stage): number {
  return STAGE_ORDER.indexOf(stage);
}

export class ConsoleStore {
  private state: ConsoleState = { session: null, runId: null, error: null };
  private listeners: Listener[] = [];

  get current(): ConsoleState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((entry) => entry !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  applySession(view: SessionView): void {
    this.state = { ...this.state, session: view, error: null };
    if (view.run_id) this.state.runId = view.run_id;
    this.emit();
  }

  applyRunCreated(created: { run_id: string }): void {
    this.state = { ...this.state, runId: created.run_id };
    if (this.state.session) {
      this.state.session = { ...this.state.session, stage: "running" };
    }
    this.emit();
  }

  applyError(message: string): void {
    this.state = { ...this.state, error: message };
    this.emit();
  }

  get stage(): Stage | null {
    return this.state.session?.stage ?? null;
  }
}
