import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ShortlistEditor } from "../src/shortlist-editor.js";
import type { SessionView, TreeDocument } from "../src/types.js";
import { fakeFetch, fixture } from "./helpers.js";

const retrieveView = fixture<SessionView>("retrieve.json");
const confirmView = fixture<SessionView>("confirm.json");
const tree = fixture<TreeDocument>("tree.json");

describe("shortlist editor", () => {
  it("displays exactly the ranked entries from the API response", () => {
    const editor = new ShortlistEditor(retrieveView);
    const entries = editor.entries();
    expect(entries).toEqual(retrieveView.shortlist!.ranked);
    for (const entry of entries) {
      expect(entry.rationale.length).toBeGreaterThan(0);
    }
  });

  it("confirm posts exactly the edited ids", async () => {
    const editor = new ShortlistEditor(retrieveView);
    editor.add("slides-deckmaker-00");
    editor.add("workflow-runner-00");
    editor.remove("workflow-runner-00");
    editor.add("slides-deckmaker-00"); // duplicate add is a no-op

    const { fetchImpl, calls } = fakeFetch({
      [`POST /shortlist/${retrieveView.task_id}/confirm`]: confirmView,
    });
    const api = new ApiClient("", fetchImpl);
    const result = await editor.confirm(api);

    expect(calls).toHaveLength(1);
    expect(calls[0]!.body).toEqual({ add: ["slides-deckmaker-00"] });
    expect(result.stage).toBe("shortlist_confirmed");
    // the confirmed selection echoes the addition back as a user-origin entry
    expect(result.selection).toContain("slides-deckmaker-00");
  });

  it("confirm with no edits posts an empty add list", async () => {
    const editor = new ShortlistEditor(retrieveView);
    const { fetchImpl, calls } = fakeFetch({
      [`POST /shortlist/${retrieveView.task_id}/confirm`]: confirmView,
    });
    await editor.confirm(new ApiClient("", fetchImpl));
    expect(calls[0]!.body).toEqual({ add: [] });
  });

  it("skills already on the shortlist cannot be re-added", () => {
    const editor = new ShortlistEditor(retrieveView);
    const first = retrieveView.shortlist!.ranked[0]!.skill_id;
    editor.add(first);
    expect(editor.addedIds()).toEqual([]);
  });

  it("searches the registry through the tree's leaves", () => {
    const editor = new ShortlistEditor(retrieveView);
    const matches = editor.search(tree, "mixer");
    expect(matches.length).toBeGreaterThan(0);
    for (const match of matches) {
      const node = Object.values(tree.nodes).find(
        (candidate) => candidate.kind === "leaf" && candidate.skill_ids[0] === match.skill_id,
      );
      expect(node, `match ${match.skill_id} must come from a tree leaf`).toBeDefined();
      expect(match.name).toBe(node!.name);
    }
  });

  it("surfaces API stage violations as errors", async () => {
    const editor = new ShortlistEditor(retrieveView);
    const fetchImpl = async () =>
      new Response(JSON.stringify({ detail: "stage violation: task is at 'plans_ready'" }), {
        status: 400,
      });
    await expect(editor.confirm(new ApiClient("", fetchImpl))).rejects.toThrow(/stage violation/);
  });
});
