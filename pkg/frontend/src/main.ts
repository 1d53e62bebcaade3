/** Console shell: wires the store, API client, and view models to the DOM. */

import { ApiClient } from "./api.js";
import { ConsentDialog, pendingConsent } from "./consent-dialog.js";
import { comparePlans, type PlanDiagram } from "./plan-view.js";
import { followRun, RunMonitor } from "./run-monitor.js";
import { ShortlistEditor } from "./shortlist-editor.js";
import { ConsoleStore } from "./store.js";
import { TreeViewModel } from "./tree-view.js";
import type { SessionView, TreeDocument } from "./types.js";

const api = new ApiClient("");
const store = new ConsoleStore();
const treeView = new TreeViewModel(api);

let editor: ShortlistEditor | null = null;
let treeDocument: TreeDocument | null = null;
let monitor: RunMonitor | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function renderTree(container: HTMLElement): void {
  container.replaceChildren(
    el("h2", {}, "Capability tree"),
    ...treeView.rows().map((row) =>
      el(
        "div",
        { class: `tree-row kind-${row.kind}`, style: `margin-left:${row.depth * 16}px` },
        el(
          "button",
          { class: "toggle", "data-node": row.node_id },
          row.kind === "leaf" ? "•" : row.expanded ? "▾" : "▸",
        ),
        ` ${row.name} `,
        el("span", { class: "muted" }, `(${row.skill_count} skills)`),
      ),
    ),
  );
  container.querySelectorAll<HTMLButtonElement>("button.toggle").forEach((button) => {
    button.addEventListener("click", async () => {
      await treeView.toggle(button.dataset["node"] ?? "");
      renderTree(container);
    });
  });
}

function renderShortlist(container: HTMLElement, session: SessionView): void {
  if (!session.shortlist) return;
  editor = editor && editor.taskId === session.task_id ? editor : new ShortlistEditor(session);
  const currentEditor = editor;
  const list = el(
    "ol",
    { class: "shortlist" },
    ...currentEditor
      .entries()
      .map((entry) =>
        el("li", {}, `${entry.skill_id} — ${entry.rationale} [${entry.origin}]`),
      ),
    ...currentEditor.addedIds().map((skillId) => el("li", { class: "added" }, `${skillId} [user]`)),
  );
  const searchBox = el("input", { placeholder: "search registry", type: "text" });
  const results = el("div", { class: "search-results" });
  searchBox.addEventListener("input", () => {
    if (!treeDocument) return;
    results.replaceChildren(
      ...currentEditor.search(treeDocument, searchBox.value).slice(0, 8).map((match) => {
        const button = el("button", {}, `add ${match.skill_id}`);
        button.addEventListener("click", () => {
          currentEditor.add(match.skill_id);
          renderApp();
        });
        return el("div", {}, `${match.name}: ${match.description} `, button);
      }),
    );
  });
  const confirm = el("button", { class: "primary" }, "Confirm shortlist");
  confirm.addEventListener("click", async () => {
    try {
      store.applySession(await currentEditor.confirm(api));
    } catch (error) {
      store.applyError(String(error));
    }
  });
  container.replaceChildren(el("h2", {}, "Shortlist"), list, searchBox, results, confirm);
}

function diagramElement(diagram: PlanDiagram, selectable: boolean): HTMLElement {
  const rows = diagram.rows.map((members, rowIndex) =>
    el(
      "div",
      { class: "dag-row", "data-layer": String(rowIndex) },
      ...members.map((subId) => el("span", { class: "dag-node", "data-sub": subId }, subId)),
    ),
  );
  const badge = el(
    "p",
    { class: "metrics" },
    `nodes ${diagram.metrics.node_count} · edges ${diagram.metrics.edge_count}` +
      ` · depth ${diagram.metrics.max_depth} · width ${diagram.metrics.max_width}`,
  );
  const choose = el(
    "button",
    selectable ? {} : { disabled: "disabled", class: "greyed" },
    `Select ${diagram.strategy}`,
  );
  if (selectable) {
    choose.addEventListener("click", async () => {
      const session = store.current.session;
      if (!session) return;
      try {
        store.applySession(await api.selectPlan(session.task_id, diagram.plan_id));
      } catch (error) {
        store.applyError(String(error));
      }
    });
  }
  return el("div", { class: "plan-diagram" }, el("h3", {}, diagram.strategy), badge, ...rows, choose);
}

function renderPlans(container: HTMLElement, session: SessionView): void {
  if (!session.plans) return;
  const comparison = comparePlans(session);
  container.replaceChildren(
    el("h2", {}, "Plans"),
    el(
      "div",
      { class: "plan-grid" },
      ...comparison.diagrams.map((diagram) => diagramElement(diagram, true)),
      ...comparison.failures.map(({ strategy, error }) =>
        el("div", { class: "plan-diagram greyed" }, el("h3", {}, strategy), el("p", {}, error)),
      ),
    ),
  );
}

async function startRun(): Promise<void> {
  const session = store.current.session;
  if (!session) return;
  const created = await api.createRun(session.task_id);
  store.applyRunCreated(created);
  const plan = session.selected_plan;
  if (!plan) return;
  monitor = new RunMonitor(plan);
  void followRun(api, created.run_id, monitor).finally(renderApp);
}

function renderRun(container: HTMLElement): void {
  if (!monitor) return;
  container.replaceChildren(
    el("h2", {}, "Run"),
    ...monitor.nodeViews().map((view) =>
      el("div", { class: `run-node status-${view.status}` }, `${view.sub_id}: ${view.status}`),
    ),
    el("p", { class: "banner" }, monitor.terminalBanner() ?? "running..."),
  );
}

function renderApp(): void {
  const app = document.getElementById("app");
  if (!app) return;
  const session = store.current.session;
  const treeSection = el("section", { id: "tree" });
  const taskSection = el("section", { id: "task" });
  const shortlistSection = el("section", { id: "shortlist" });
  const plansSection = el("section", { id: "plans" });
  const runSection = el("section", { id: "run" });

  renderTree(treeSection);

  const input = el("textarea", { placeholder: "Describe the task", rows: "3" });
  const submit = el("button", { class: "primary" }, "Retrieve skills");
  submit.addEventListener("click", async () => {
    try {
      editor = null;
      const view = await api.retrieve(input.value);
      store.applySession(view);
      const hit = pendingConsent(view);
      if (hit) {
        const dialog = new ConsentDialog(view.task_id, hit);
        const detail = dialog.view();
        const accept = el("button", {}, `Reuse plan (similarity ${detail.similarity.toFixed(2)})`);
        const decline = el("button", {}, "Plan from scratch");
        accept.addEventListener("click", async () => store.applySession(await dialog.accept(api)));
        decline.addEventListener("click", async () => store.applySession(await dialog.decline(api)));
        taskSection.append(
          el("div", { class: "consent" }, el("p", {}, `Similar task: ${detail.taskText}`), accept, decline),
        );
      }
    } catch (error) {
      store.applyError(String(error));
    }
  });
  taskSection.append(el("h2", {}, "Task"), input, submit);

  if (session?.stage === "retrieved" && session.shortlist) renderShortlist(shortlistSection, session);
  if (session?.stage === "shortlist_confirmed") {
    const button = el("button", { class: "primary" }, "Generate plans");
    button.addEventListener("click", async () =>
      store.applySession(await api.generatePlans(session.task_id)),
    );
    plansSection.append(button);
  }
  if (session?.stage === "plans_ready") renderPlans(plansSection, session);
  if (session?.stage === "plan_selected") {
    const button = el("button", { class: "primary" }, "Start run");
    button.addEventListener("click", () => void startRun());
    runSection.append(button);
  }
  renderRun(runSection);

  const error = store.current.error;
  app.replaceChildren(
    el("h1", {}, "skillos console"),
    error ? el("p", { class: "error" }, error) : "",
    treeSection,
    taskSection,
    shortlistSection,
    plansSection,
    runSection,
  );
}

async function boot(): Promise<void> {
  try {
    treeDocument = await api.getTree();
    await treeView.load();
  } catch {
    // service may have no tree yet; the console still renders
  }
  store.subscribe(() => renderApp());
  renderApp();
}

if (typeof document !== "undefined") {
  void boot();
}
