import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ConsentDialog, pendingConsent } from "../src/consent-dialog.js";
import type { SessionView } from "../src/types.js";
import { fakeFetch, fixture } from "./helpers.js";

const hitView = fixture<SessionView>("retrieve_hit.json");
const acceptView = fixture<SessionView>("consent_accept.json");
const declineView = fixture<SessionView>("consent_decline.json");
const plainView = fixture<SessionView>("retrieve.json");

describe("consent dialog", () => {
  it("appears only when retrieval reports a recipe hit", () => {
    expect(pendingConsent(hitView)).not.toBeNull();
    expect(pendingConsent(plainView)).toBeNull();
  });

  it("shows the matched recipe's text, similarity, and plan preview", () => {
    const hit = pendingConsent(hitView)!;
    const view = new ConsentDialog(hitView.task_id, hit).view();
    expect(view.taskText).toBe(hit.task_text);
    expect(view.similarity).toBeCloseTo(1.0, 6);
    expect(view.planPreview.nodes.length).toBe(hit.plan.nodes.length);
  });

  it("accept posts consent and reaches plan_selected", async () => {
    const hit = pendingConsent(hitView)!;
    const { fetchImpl, calls } = fakeFetch({
      [`POST /runs/${hitView.task_id}/consent`]: acceptView,
    });
    const result = await new ConsentDialog(hitView.task_id, hit).accept(
      new ApiClient("", fetchImpl),
    );
    expect(calls[0]!.body).toEqual({ accept: true });
    expect(result.stage).toBe("plan_selected");
    expect(result.selected_plan).toBeDefined();
  });

  it("decline resumes the normal retrieval flow", async () => {
    const hit = pendingConsent(hitView)!;
    const { fetchImpl, calls } = fakeFetch({
      [`POST /runs/${hitView.task_id}/consent`]: declineView,
    });
    const result = await new ConsentDialog(hitView.task_id, hit).decline(
      new ApiClient("", fetchImpl),
    );
    expect(calls[0]!.body).toEqual({ accept: false });
    expect(result.stage).toBe("retrieved");
    expect(result.shortlist!.ranked.length).toBeGreaterThan(0);
  });
});
