/** Recipe reuse consent: show the matched recipe, accept to skip ahead or
 * decline to resume the normal retrieval flow. */

import type { ApiClient } from "./api.js";
import { layoutPlan, type PlanDiagram } from "./plan-view.js";
import type { RecipeHit, SessionView } from "./types.js";

export interface ConsentView {
  taskText: string;
  similarity: number;
  planPreview: PlanDiagram;
}

/** The dialog appears only when retrieval reported a recipe hit. */
export function pendingConsent(view: SessionView): RecipeHit | null {
  return view.recipe_hit ?? null;
}

export class ConsentDialog {
  constructor(
    private taskId: string,
    private hit: RecipeHit,
  ) {}

  view(): ConsentView {
    return {
      taskText: this.hit.task_text,
      similarity: this.hit.similarity,
      planPreview: layoutPlan(this.hit.plan),
    };
  }

  async accept(api: Pick<ApiClient, "consent">): Promise<SessionView> {
    return api.consent(this.taskId, true);
  }

  async decline(api: Pick<ApiClient, "consent">): Promise<SessionView> {
    return api.consent(this.taskId, false);
  }
}
