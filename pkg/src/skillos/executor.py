"""Layered plan execution with artifact flow and recipe reuse.

A run walks the plan layer by layer: nodes inside one layer are
dependency-free and dispatched concurrently, each into its own workspace
directory. Files a node writes become artifacts visible to its downstream
nodes through the execution prompt. Failures skip exactly the transitive
dependents while independent branches keep running. Successful runs can
be stored as recipes and reused for similar task texts.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fnmatch import fnmatch
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import BackendFailure, PredecessorNotSucceeded
from .media import media_kind
from .orchestrator import OrchestrationPlan
from .registry import Skill

logger = logging.getLogger(__name__)

DEFAULT_RECIPE_THRESHOLD = 0.92


# --------------------------------------------------------------------------
# data model
# --------------------------------------------------------------------------


@dataclass
class Artifact:
    producer: str
    path: str  # relative to the run workspace
    kind: str
    usage_hint: str

    def to_document(self) -> dict:
        return {
            "producer": self.producer,
            "path": self.path,
            "kind": self.kind,
            "usage_hint": self.usage_hint,
        }


@dataclass
class NodeSummary:
    sub_id: str
    status: str
    outputs: list[str] = field(default_factory=list)
    summary_text: str = ""

    def to_document(self) -> dict:
        return {
            "sub_id": self.sub_id,
            "status": self.status,
            "outputs": list(self.outputs),
            "summary_text": self.summary_text,
        }


@dataclass(frozen=True)
class RunEvent:
    run_id: str
    sub_id: str | None
    status: str
    ts: float

    def to_document(self) -> dict:
        return {"run_id": self.run_id, "sub_id": self.sub_id, "status": self.status, "ts": self.ts}


class RunState:
    """Mutable run progress, updated only through one serialized event channel."""

    def __init__(self, run_id: str, plan: OrchestrationPlan, task: str, workspace: Path):
        self.run_id = run_id
        self.plan = plan
        self.task = task
        self.workspace = workspace
        self.statuses: dict[str, str] = {sub_id: "pending" for sub_id in plan.sub_ids}
        self.artifacts: list[Artifact] = []
        self.summaries: dict[str, NodeSummary] = {}
        self.overall = "running"
        self.events: list[RunEvent] = []
        self._lock = threading.Lock()
        self._event_sinks: list[Callable[[RunEvent], None]] = []

    def add_event_sink(self, sink: Callable[[RunEvent], None]) -> None:
        self._event_sinks.append(sink)

    def emit(self, sub_id: str | None, status: str) -> RunEvent:
        with self._lock:
            event = RunEvent(run_id=self.run_id, sub_id=sub_id, status=status, ts=time.time())
            self.events.append(event)
            if sub_id is not None:
                self.statuses[sub_id] = status
            else:
                self.overall = status
            with open(self.workspace / "events.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_document(), sort_keys=True) + "\n")
        for sink in self._event_sinks:
            sink(event)
        return event

    def record_result(self, summary: NodeSummary, artifacts: Sequence[Artifact]) -> None:
        with self._lock:
            self.summaries[summary.sub_id] = summary
            self.artifacts.extend(artifacts)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "run_id": self.run_id,
                "task": self.task,
                "overall": self.overall,
                "plan": self.plan.to_document(),
                "statuses": dict(self.statuses),
                "summaries": {k: v.to_document() for k, v in self.summaries.items()},
                "artifacts": [a.to_document() for a in self.artifacts],
            }

    def artifacts_of(self, sub_id: str) -> list[Artifact]:
        with self._lock:
            return [a for a in self.artifacts if a.producer == sub_id]


# --------------------------------------------------------------------------
# executor backends
# --------------------------------------------------------------------------


class ScriptedExecutorBackend:
    """Offline backend that writes declared fixture files.

    ``outputs`` maps sub_id to a list of (filename, content) pairs; nodes
    without a declaration get one file per expected-output pattern, with
    ``*`` expanded to the sub_id. ``fail`` names nodes that must raise,
    ``sleep`` stretches every node to let same-layer overlap show up in
    event logs.
    """

    def __init__(
        self,
        outputs: Mapping[str, Sequence[tuple[str, str]]] | None = None,
        fail: set[str] | None = None,
        sleep: float = 0.0,
    ):
        self.outputs = {k: list(v) for k, v in (outputs or {}).items()}
        self.fail = set(fail or ())
        self.sleep = sleep

    def execute(self, prompt: dict, skill: Skill, workdir: Path) -> str:
        sub_id = prompt["sub_task"]["sub_id"]
        if self.sleep:
            time.sleep(self.sleep)
        if sub_id in self.fail:
            raise RuntimeError(f"scripted failure for {sub_id}")
        if sub_id in self.outputs:
            declared = self.outputs[sub_id]
        else:
            declared = []
            for expected in prompt["sub_task"]["expected_outputs"]:
                filename = expected["pattern"].replace("*", sub_id)
                declared.append((filename, f"{sub_id} output via {skill.id}\n"))
        for filename, content in declared:
            target = workdir / filename
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content, encoding="utf-8")
        return f"wrote {len(declared)} file(s)"


class CommandExecutorBackend:
    """Adapter for a live agent runtime invoked as an external command.

    The command runs inside the node workspace with the prompt document on
    stdin as JSON; whatever files it leaves behind become artifacts.
    """

    def __init__(self, command: Sequence[str], timeout: float = 3600.0):
        self.command = list(command)
        self.timeout = timeout

    def execute(self, prompt: dict, skill: Skill, workdir: Path) -> str:
        import subprocess

        result = subprocess.run(
            self.command,
            input=json.dumps(prompt, sort_keys=True),
            capture_output=True,
            text=True,
            cwd=workdir,
            timeout=self.timeout,
        )
        if result.returncode != 0:
            raise BackendFailure(f"command exited {result.returncode}: {result.stderr[:500]}")
        return result.stdout[-2000:]


# --------------------------------------------------------------------------
# scheduling and prompts
# --------------------------------------------------------------------------


def schedule_layers(plan: OrchestrationPlan) -> list[list[str]]:
    """Group nodes by layer, ascending; verify within-layer independence."""
    layers: dict[int, list[str]] = {}
    for node in plan.nodes:
        layers.setdefault(node.layer, []).append(node.sub_task.sub_id)
    ordered = [sorted(layers[level]) for level in sorted(layers)]
    edge_set = set(plan.edges)
    for members in ordered:
        for u in members:
            for v in members:
                if u != v and (u, v) in edge_set:
                    raise ValueError(f"layer contains dependent nodes {u} -> {v}")
    return ordered


def build_node_prompt(run: RunState, sub_id: str, skill: Skill) -> dict:
    """Assemble the execution prompt document for one node.

    Order: full task, skill to invoke, sub-task objective, upstream
    artifacts with hints (absent on source nodes), expected outputs, and
    downstream consumption notes (absent on sinks).
    """
    node = run.plan.node(sub_id)
    predecessors = run.plan.predecessors(sub_id)
    for pred in predecessors:
        if run.statuses.get(pred) != "succeeded":
            raise PredecessorNotSucceeded(f"{pred} is {run.statuses.get(pred)}")
    prompt: dict = {
        "task": run.task,
        "skill": {
            "id": skill.id,
            "name": skill.name,
            "instructions": str(Path(skill.root_path) / "SKILL.md"),
        },
        "sub_task": {
            "sub_id": sub_id,
            "objective": node.sub_task.objective,
            "expected_outputs": [
                {"pattern": out.pattern, "purpose": out.purpose}
                for out in node.sub_task.expected_outputs
            ],
        },
    }
    if predecessors:
        upstream = []
        for pred in sorted(predecessors):
            for artifact in run.artifacts_of(pred):
                upstream.append(
                    {
                        "path": str(run.workspace / artifact.path),
                        "producer": artifact.producer,
                        "kind": artifact.kind,
                        "usage_hint": artifact.usage_hint,
                    }
                )
        prompt["upstream_artifacts"] = upstream
    successors = run.plan.successors(sub_id)
    if successors:
        prompt["downstream_consumers"] = [
            {
                "sub_id": succ,
                "objective": run.plan.node(succ).sub_task.objective,
            }
            for succ in sorted(successors)
        ]
    return prompt


def execute_node(
    prompt: dict, skill: Skill, backend, workdir: Path
) -> tuple[NodeSummary, list[Artifact]]:
    """Run one node through the backend and collect what it produced."""
    if not Path(skill.root_path).is_dir():
        raise BackendFailure(f"skill folder {skill.root_path} is not readable")
    workdir.mkdir(parents=True, exist_ok=True)
    sub_id = prompt["sub_task"]["sub_id"]
    before = {p for p in workdir.rglob("*") if p.is_file()}
    try:
        report = backend.execute(prompt, skill, workdir)
    except BackendFailure:
        raise
    except Exception as exc:  # noqa: BLE001 - backend contract: any raise is a failure
        raise BackendFailure(str(exc)) from exc

    produced = sorted(p for p in workdir.rglob("*") if p.is_file() and p not in before)
    expected = prompt["sub_task"]["expected_outputs"]
    artifacts = []
    for path in produced:
        relative = path.relative_to(workdir)
        hint = next(
            (
                out["purpose"]
                for out in expected
                if out.get("purpose")
                and (fnmatch(str(relative), out["pattern"]) or fnmatch(path.name, out["pattern"]))
            ),
            f"output of {sub_id}",
        )
        artifacts.append(
            Artifact(
                producer=sub_id,
                path=f"{sub_id}/{relative}",
                kind=media_kind(path),
                usage_hint=hint,
            )
        )

    missing = [
        out["pattern"]
        for out in expected
        if not any(
            fnmatch(str(p.relative_to(workdir)), out["pattern"]) or fnmatch(p.name, out["pattern"])
            for p in produced
        )
    ]
    if missing:
        summary = NodeSummary(
            sub_id=sub_id,
            status="failed",
            outputs=[a.path for a in artifacts],
            summary_text=f"status: failed\nreason: expected outputs missing: {', '.join(missing)}",
        )
        return summary, artifacts
    summary = NodeSummary(
        sub_id=sub_id,
        status="succeeded",
        outputs=[a.path for a in artifacts],
        summary_text=(
            f"status: succeeded\noutputs: {', '.join(a.path for a in artifacts) or '(none)'}\n"
            f"report: {report}"
        ),
    )
    return summary, artifacts


# --------------------------------------------------------------------------
# run loop
# --------------------------------------------------------------------------


def run_plan(
    plan: OrchestrationPlan,
    task: str,
    backend,
    skills: Mapping[str, Skill],
    workspace_root: str | Path,
    run_id: str | None = None,
    max_workers: int | None = None,
    event_sink: Callable[[RunEvent], None] | None = None,
    on_start: Callable[[RunState], None] | None = None,
) -> RunState:
    """Execute the plan layer by layer with same-layer parallelism.

    A failed node marks all transitive dependents skipped; independent
    nodes keep running. The event log and run.json land in the run's
    workspace directory. ``on_start`` receives the live RunState before
    the first node dispatch, so observers can follow progress.
    """
    run_id = run_id or uuid.uuid4().hex[:12]
    workspace = Path(workspace_root) / "runs" / run_id
    workspace.mkdir(parents=True, exist_ok=True)
    run = RunState(run_id=run_id, plan=plan, task=task, workspace=workspace)
    if event_sink:
        run.add_event_sink(event_sink)
    if on_start:
        on_start(run)
    run.emit(None, "running")

    dead: set[str] = set()  # failed or skipped
    for layer_members in schedule_layers(plan):
        runnable: list[str] = []
        for sub_id in layer_members:
            blocked = [p for p in plan.predecessors(sub_id) if p in dead]
            if blocked:
                run.emit(sub_id, "skipped")
                dead.add(sub_id)
            else:
                runnable.append(sub_id)
        if not runnable:
            continue
        workers = min(len(runnable), max_workers) if max_workers else len(runnable)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                sub_id: pool.submit(_run_node, run, sub_id, backend, skills)
                for sub_id in runnable
            }
            for sub_id, future in futures.items():
                if not future.result():
                    dead.add(sub_id)

    overall = "succeeded" if all(s == "succeeded" for s in run.statuses.values()) else "failed"
    run.emit(None, overall)
    (workspace / "run.json").write_text(
        json.dumps(run.snapshot(), indent=2, sort_keys=True), encoding="utf-8"
    )
    return run


def _run_node(run: RunState, sub_id: str, backend, skills: Mapping[str, Skill]) -> bool:
    node = run.plan.node(sub_id)
    skill = skills[node.sub_task.skill_id]
    workdir = run.workspace / sub_id
    workdir.mkdir(parents=True, exist_ok=True)
    prompt = build_node_prompt(run, sub_id, skill)
    run.emit(sub_id, "running")
    try:
        summary, artifacts = execute_node(prompt, skill, backend, workdir)
    except BackendFailure as exc:
        summary = NodeSummary(
            sub_id=sub_id, status="failed", summary_text=f"status: failed\nreason: {exc}"
        )
        artifacts = []
    run.record_result(summary, artifacts)
    run.emit(sub_id, summary.status)
    return summary.status == "succeeded"


# --------------------------------------------------------------------------
# recipe pool
# --------------------------------------------------------------------------


@dataclass
class Recipe:
    recipe_id: str
    task_text: str
    task_embedding: list[float]
    plan_document: dict
    created_at: float
    use_count: int = 0

    def to_document(self) -> dict:
        return {
            "recipe_id": self.recipe_id,
            "task_text": self.task_text,
            "task_embedding": self.task_embedding,
            "plan": self.plan_document,
            "created_at": self.created_at,
            "use_count": self.use_count,
        }

    @classmethod
    def from_document(cls, document: dict) -> "Recipe":
        return cls(
            recipe_id=document["recipe_id"],
            task_text=document["task_text"],
            task_embedding=document["task_embedding"],
            plan_document=document["plan"],
            created_at=document["created_at"],
            use_count=document.get("use_count", 0),
        )


class RecipePool:
    """Append-mostly store of past successful orchestrations."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.recipes: list[Recipe] = []
        if self.path.is_file():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self.recipes.append(Recipe.from_document(json.loads(line)))

    def __len__(self) -> int:
        return len(self.recipes)

    def append(self, recipe: Recipe) -> None:
        self.recipes.append(recipe)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(recipe.to_document(), sort_keys=True) + "\n")

    def record_use(self, recipe_id: str) -> None:
        for recipe in self.recipes:
            if recipe.recipe_id == recipe_id:
                recipe.use_count += 1
                break
        with open(self.path, "w", encoding="utf-8") as fh:
            for recipe in self.recipes:
                fh.write(json.dumps(recipe.to_document(), sort_keys=True) + "\n")


def store_recipe(
    task_text: str,
    plan: OrchestrationPlan,
    embedder,
    pool: RecipePool,
    run: RunState | None = None,
) -> Recipe:
    """Persist a successful orchestration for later reuse."""
    if run is not None and run.overall != "succeeded":
        raise ValueError("only successfully completed orchestrations are stored")
    recipe = Recipe(
        recipe_id=uuid.uuid4().hex[:12],
        task_text=task_text,
        task_embedding=embedder.embed(task_text),
        plan_document=plan.to_document(),
        created_at=time.time(),
    )
    pool.append(recipe)
    return recipe


def lookup_recipe(
    task_text: str,
    pool: RecipePool,
    embedder,
    threshold: float = DEFAULT_RECIPE_THRESHOLD,
) -> tuple[Recipe, float] | None:
    """Highest-similarity recipe at or above the threshold, else None."""
    if not pool.recipes:
        return None
    query = embedder.embed(task_text)
    best: Recipe | None = None
    best_similarity = -1.0
    for recipe in pool.recipes:
        similarity = sum(a * b for a, b in zip(query, recipe.task_embedding))
        if similarity > best_similarity:
            best, best_similarity = recipe, similarity
    if best is not None and best_similarity >= threshold:
        return best, best_similarity
    return None
