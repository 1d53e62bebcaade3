/** Wire types for the skillos service API. */

export type Stage =
  | "retrieved"
  | "shortlist_confirmed"
  | "plans_ready"
  | "plan_selected"
  | "running"
  | "done";

export type Origin = "tree" | "dormant" | "user";

export interface ShortlistEntry {
  skill_id: string;
  rank: number;
  rationale: string;
  origin: Origin;
}

export interface Shortlist {
  ranked: ShortlistEntry[];
}

export interface ExpectedOutput {
  pattern: string;
  purpose: string;
}

export interface PlanNode {
  sub_id: string;
  skill_id: string;
  objective: string;
  expected_outputs: ExpectedOutput[];
  layer: number;
}

export interface PlanMetrics {
  node_count: number;
  edge_count: number;
  max_depth: number;
  max_width: number;
}

export interface PlanDocument {
  plan_id: string;
  strategy: string;
  nodes: PlanNode[];
  edges: [string, string][];
  metrics?: PlanMetrics;
}

export interface RecipeHit {
  recipe_id: string;
  similarity: number;
  task_text: string;
  plan: PlanDocument;
}

export interface SessionView {
  task_id: string;
  stage: Stage;
  shortlist?: Shortlist;
  selection?: string[];
  plans?: Record<string, PlanDocument>;
  plan_failures?: Record<string, string>;
  selected_plan?: PlanDocument;
  recipe_hit?: RecipeHit;
  run_id?: string;
}

export type NodeStatus = "pending" | "running" | "succeeded" | "failed" | "skipped";

export interface RunEvent {
  run_id: string;
  sub_id: string | null;
  status: string;
  ts: number;
}

export interface NodeSummary {
  sub_id: string;
  status: NodeStatus;
  outputs: string[];
  summary_text: string;
}

export interface ArtifactRecord {
  producer: string;
  path: string;
  kind: string;
  usage_hint: string;
}

export interface RunSnapshot {
  run_id: string;
  task: string;
  overall: "running" | "succeeded" | "failed";
  plan: PlanDocument;
  statuses: Record<string, NodeStatus>;
  summaries: Record<string, NodeSummary>;
  artifacts: ArtifactRecord[];
}

export interface TreeNodeChild {
  node_id: string;
  name: string;
  description: string;
  kind: "category" | "leaf";
  skill_count: number;
  child_count: number;
}

export interface TreeNodeView {
  node_id: string;
  name: string;
  description: string;
  kind: "category" | "leaf";
  skill_count: number;
  skill_ids: string[];
  children: TreeNodeChild[];
}

export interface TreeDocument {
  config: { B: number; C: number };
  root: string;
  nodes: Record<
    string,
    {
      name: string;
      description: string;
      kind: "category" | "leaf";
      children: string[];
      skill_ids: string[];
    }
  >;
}

export interface RankingReport {
  systems: string[];
  beta: number[];
  score: number[];
  iterations: number;
}

export interface RecipeListing {
  recipes: {
    recipe_id: string;
    task_text: string;
    created_at: number;
    use_count: number;
  }[];
}
