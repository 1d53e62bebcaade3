/** Shortlist review: display ranked entries with rationales, let the user
 * add registry skills, and confirm exactly the edited id set. */

import type { ApiClient } from "./api.js";
import type { SessionView, ShortlistEntry, TreeDocument } from "./types.js";

export interface RegistryMatch {
  skill_id: string;
  name: string;
  description: string;
}

export class ShortlistEditor {
  private added: string[] = [];

  constructor(private view: SessionView) {
    if (!view.shortlist) {
      throw new Error("session has no shortlist to edit");
    }
  }

  get taskId(): string {
    return this.view.task_id;
  }

  /** Rows straight from the API response, untouched. */
  entries(): ShortlistEntry[] {
    return this.view.shortlist?.ranked ?? [];
  }

  addedIds(): string[] {
    return [...this.added];
  }

  add(skillId: string): void {
    const existing = new Set(this.entries().map((entry) => entry.skill_id));
    if (existing.has(skillId) || this.added.includes(skillId)) return;
    this.added.push(skillId);
  }

  remove(skillId: string): void {
    this.added = this.added.filter((entry) => entry !== skillId);
  }

  /** Search the registry by scanning the tree's leaves client-side. */
  search(tree: TreeDocument, query: string): RegistryMatch[] {
    const needle = query.trim().toLowerCase();
    if (!needle) return [];
    const matches: RegistryMatch[] = [];
    for (const node of Object.values(tree.nodes)) {
      if (node.kind !== "leaf") continue;
      const skillId = node.skill_ids[0];
      if (skillId === undefined) continue;
      const haystack = `${skillId} ${node.name} ${node.description}`.toLowerCase();
      if (haystack.includes(needle)) {
        matches.push({ skill_id: skillId, name: node.name, description: node.description });
      }
    }
    return matches.sort((a, b) => a.skill_id.localeCompare(b.skill_id));
  }

  /** The exact request body confirmation will send. */
  confirmBody(): { add: string[] } {
    return { add: [...this.added] };
  }

  async confirm(api: Pick<ApiClient, "confirmShortlist">): Promise<SessionView> {
    return api.confirmShortlist(this.taskId, this.confirmBody().add);
  }
}
