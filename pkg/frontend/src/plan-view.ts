/** Layered DAG diagrams for side-by-side plan comparison.
 *
 * Layout is keyed directly off each node's layer: row = layer, so every
 * dependency edge points strictly downward. Nothing is recomputed that the
 * service already decided.
 */

import type { PlanDocument, PlanMetrics, SessionView } from "./types.js";

export interface DiagramNode {
  sub_id: string;
  skill_id: string;
  objective: string;
  layer: number;
  row: number;
  col: number;
}

export interface DiagramEdge {
  from: string;
  to: string;
  fromRow: number;
  toRow: number;
  upward: boolean;
}

export interface PlanDiagram {
  plan_id: string;
  strategy: string;
  rows: string[][];
  nodes: DiagramNode[];
  edges: DiagramEdge[];
  metrics: PlanMetrics;
}

export function layoutPlan(plan: PlanDocument): PlanDiagram {
  const byLayer = new Map<number, string[]>();
  for (const node of plan.nodes) {
    const members = byLayer.get(node.layer) ?? [];
    members.push(node.sub_id);
    byLayer.set(node.layer, members);
  }
  const layers = [...byLayer.keys()].sort((a, b) => a - b);
  const rows = layers.map((layer) => (byLayer.get(layer) ?? []).sort());

  const position = new Map<string, { row: number; col: number }>();
  rows.forEach((members, rowIndex) => {
    members.forEach((subId, colIndex) => position.set(subId, { row: rowIndex, col: colIndex }));
  });

  const nodes: DiagramNode[] = plan.nodes.map((node) => {
    const slot = position.get(node.sub_id);
    if (!slot) throw new Error(`node ${node.sub_id} missing from layout`);
    return {
      sub_id: node.sub_id,
      skill_id: node.skill_id,
      objective: node.objective,
      layer: node.layer,
      row: slot.row,
      col: slot.col,
    };
  });

  const edges: DiagramEdge[] = plan.edges.map(([from, to]) => {
    const fromSlot = position.get(from);
    const toSlot = position.get(to);
    if (!fromSlot || !toSlot) throw new Error(`edge (${from}, ${to}) references unknown node`);
    return {
      from,
      to,
      fromRow: fromSlot.row,
      toRow: toSlot.row,
      upward: toSlot.row <= fromSlot.row,
    };
  });
  const bad = edges.filter((edge) => edge.upward);
  if (bad.length > 0) {
    throw new Error(`plan ${plan.plan_id} has non-descending edges: ${bad.map((e) => `${e.from}->${e.to}`).join(", ")}`);
  }

  return {
    plan_id: plan.plan_id,
    strategy: plan.strategy,
    rows,
    nodes,
    edges,
    metrics: plan.metrics ?? computeMetricsFallback(plan, rows),
  };
}

function computeMetricsFallback(plan: PlanDocument, rows: string[][]): PlanMetrics {
  return {
    node_count: plan.nodes.length,
    edge_count: plan.edges.length,
    max_depth: rows.length,
    max_width: Math.max(...rows.map((members) => members.length), 0),
  };
}

export interface PlanComparison {
  diagrams: PlanDiagram[];
  failures: { strategy: string; error: string }[];
  selectable: Set<string>;
}

/** Build the side-by-side comparison; failed strategies render greyed out. */
export function comparePlans(view: SessionView): PlanComparison {
  const diagrams: PlanDiagram[] = [];
  const selectable = new Set<string>();
  for (const plan of Object.values(view.plans ?? {})) {
    const diagram = layoutPlan(plan);
    diagrams.push(diagram);
    selectable.add(diagram.plan_id);
  }
  diagrams.sort((a, b) => a.strategy.localeCompare(b.strategy));
  const failures = Object.entries(view.plan_failures ?? {}).map(([strategy, error]) => ({
    strategy,
    error,
  }));
  return { diagrams, failures, selectable };
}

export function canSelect(comparison: PlanComparison, planId: string): boolean {
  return comparison.selectable.has(planId);
}
