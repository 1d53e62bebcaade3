/** Capability tree browser with lazy-loaded children.
 *
 * Renders only what GET /tree/{node_id} returned; never mutates tree state.
 */

import type { ApiClient } from "./api.js";
import type { TreeNodeView } from "./types.js";

export interface TreeRow {
  node_id: string;
  name: string;
  description: string;
  kind: "category" | "leaf";
  depth: number;
  skill_count: number;
  child_count: number;
  expanded: boolean;
}

type NodeApi = Pick<ApiClient, "getTree" | "getTreeNode">;

export class TreeViewModel {
  private expanded = new Set<string>();
  private cache = new Map<string, TreeNodeView>();
  private rootId: string | null = null;

  constructor(private api: NodeApi) {}

  async load(): Promise<void> {
    const tree = await this.api.getTree();
    this.rootId = tree.root;
    await this.ensure(tree.root);
    this.expanded.add(tree.root);
  }

  private async ensure(nodeId: string): Promise<TreeNodeView> {
    const cached = this.cache.get(nodeId);
    if (cached) return cached;
    const fetched = await this.api.getTreeNode(nodeId);
    this.cache.set(nodeId, fetched);
    return fetched;
  }

  isExpanded(nodeId: string): boolean {
    return this.expanded.has(nodeId);
  }

  async toggle(nodeId: string): Promise<void> {
    if (this.expanded.has(nodeId)) {
      this.expanded.delete(nodeId);
      return;
    }
    await this.ensure(nodeId); // lazy fetch on first expansion
    this.expanded.add(nodeId);
  }

  /** Flattened visible rows, depth-first through expanded nodes. */
  rows(): TreeRow[] {
    if (this.rootId === null) return [];
    const out: TreeRow[] = [];
    const walk = (nodeId: string, depth: number) => {
      const node = this.cache.get(nodeId);
      if (!node) return;
      out.push({
        node_id: node.node_id,
        name: node.name,
        description: node.description,
        kind: node.kind,
        depth,
        skill_count: node.skill_count,
        child_count: node.children.length,
        expanded: this.expanded.has(nodeId),
      });
      if (!this.expanded.has(nodeId)) return;
      for (const child of node.children) {
        if (this.cache.has(child.node_id)) {
          walk(child.node_id, depth + 1);
        } else {
          out.push({
            node_id: child.node_id,
            name: child.name,
            description: child.description,
            kind: child.kind,
            depth: depth + 1,
            skill_count: child.skill_count,
            child_count: child.child_count,
            expanded: false,
          });
        }
      }
    };
    walk(this.rootId, 0);
    return out;
  }
}
