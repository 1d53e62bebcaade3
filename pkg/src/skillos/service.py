"""HTTP service exposing the full pipeline with a per-task stage machine.

Each task session moves monotonically through
retrieved -> shortlist_confirmed -> plans_ready -> plan_selected ->
running -> done; a consented recipe hit may jump straight from retrieved
to plan_selected. Every endpoint is a thin adapter over the module
operations, and run progress streams out as newline-delimited JSON.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Iterator

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .config import Config
from .errors import SkillOSError, UnknownSkill
from .evaluation import (
    aggregate,
    append_outcome,
    convert_artifacts,
    debiased_compare,
    load_outcomes,
    rank_systems,
)
from .executor import RecipePool, RunState, lookup_recipe, run_plan, store_recipe
from .orchestrator import OrchestrationPlan, PlanSet, generate_plan_set, plan_metrics
from .registry import Registry, build_dormant_index, select_active_set
from .retrieval import Shortlist, TaskRequest, finalize_selection, retrieve
from .tree import CapabilityTree

STAGES = ("retrieved", "shortlist_confirmed", "plans_ready", "plan_selected", "running", "done")


@dataclass
class Session:
    task_id: str
    description: str
    stage: str = "retrieved"
    shortlist: Shortlist | None = None
    selection: list[str] = field(default_factory=list)
    plan_set: PlanSet | None = None
    selected_plan: OrchestrationPlan | None = None
    recipe_hit: dict | None = None
    from_recipe: bool = False
    run_id: str | None = None


class ServiceState:
    def __init__(self, config: Config):
        self.config = config
        self.workspace = config.workspace_path()
        self.workspace.mkdir(parents=True, exist_ok=True)
        self.gateway = config.build_gateway()
        self.executor_backend = config.build_executor_backend()
        self.registry = self._load_registry()
        self.tree = self._load_tree()
        self.dormant = self._build_dormant()
        self.recipes = RecipePool(self.workspace / "recipes.jsonl")
        self.sessions: dict[str, Session] = {}
        self.runs: dict[str, RunState] = {}
        self.lock = threading.Lock()

    def _load_registry(self) -> Registry:
        path = self.workspace / "registry.json"
        return Registry.load(path) if path.is_file() else Registry()

    def _load_tree(self) -> CapabilityTree | None:
        path = self.workspace / "tree.json"
        return CapabilityTree.load(path) if path.is_file() else None

    def _build_dormant(self):
        if self.tree is None:
            active: list[str] = list(self.registry.eco.skills)
        else:
            active = select_active_set(self.registry.eco, self.config.k) if len(self.registry) else []
        return build_dormant_index(self.registry.eco, active, self.gateway)


class RetrieveBody(BaseModel):
    description: str
    user_added_ids: list[str] = []


class ConfirmBody(BaseModel):
    add: list[str] = []


class PlansBody(BaseModel):
    task_id: str


class SelectBody(BaseModel):
    plan_id: str


class RunBody(BaseModel):
    task_id: str


class ConsentBody(BaseModel):
    accept: bool


class CompareBody(BaseModel):
    task_id: str
    system_i: str
    system_j: str
    dir_i: str
    dir_j: str
    task: str = ""


def create_app(config: Config) -> FastAPI:
    state = ServiceState(config)
    app = FastAPI(title="skillos")
    app.state.service = state

    def session_or_404(task_id: str) -> Session:
        session = state.sessions.get(task_id)
        if session is None:
            raise HTTPException(404, f"unknown task {task_id}")
        return session

    def require_stage(session: Session, expected: str) -> None:
        if session.stage != expected:
            raise HTTPException(
                400, f"stage violation: task is at {session.stage!r}, expected {expected!r}"
            )

    # -- tree ---------------------------------------------------------------

    @app.get("/tree")
    def get_tree():
        if state.tree is None:
            raise HTTPException(404, "no capability tree built")
        return state.tree.to_document()

    @app.get("/tree/{node_id}")
    def get_tree_node(node_id: str):
        if state.tree is None:
            raise HTTPException(404, "no capability tree built")
        node = state.tree.nodes.get(node_id)
        if node is None:
            raise HTTPException(404, f"unknown node {node_id}")
        return {
            "node_id": node.node_id,
            "name": node.name,
            "description": node.description,
            "kind": node.kind,
            "skill_count": len(node.skill_ids),
            "skill_ids": sorted(node.skill_ids),
            "children": [
                {
                    "node_id": child.node_id,
                    "name": child.name,
                    "description": child.description,
                    "kind": child.kind,
                    "skill_count": len(child.skill_ids),
                    "child_count": len(child.children),
                }
                for child in state.tree.children_of(node_id)
            ],
        }

    # -- retrieval ------------------------------------------------------------

    @app.post("/retrieve")
    def post_retrieve(body: RetrieveBody):
        if state.tree is None:
            raise HTTPException(400, "no capability tree built")
        task_id = f"task-{uuid.uuid4().hex[:10]}"
        with state.lock:
            session = Session(task_id=task_id, description=body.description)
            state.sessions[task_id] = session
            hit = lookup_recipe(
                body.description, state.recipes, state.gateway, state.config.recipe_threshold
            )
            if hit is not None:
                recipe, similarity = hit
                session.recipe_hit = {
                    "recipe_id": recipe.recipe_id,
                    "similarity": similarity,
                    "task_text": recipe.task_text,
                    "plan": recipe.plan_document,
                }
            else:
                session.shortlist = _run_retrieval(state, session, body.user_added_ids)
        return _session_view(session)

    def _run_retrieval(state: ServiceState, session: Session, user_ids: list[str]) -> Shortlist:
        task = TaskRequest(
            task_id=session.task_id,
            description=session.description,
            embedding=state.gateway.embed(session.description),
            user_added_ids=set(user_ids),
        )
        try:
            return retrieve(
                state.tree,
                task,
                state.gateway,
                state.registry,
                state.dormant,
                m=state.config.m,
                dormant_n=state.config.dormant_n,
            )
        except UnknownSkill as exc:
            raise HTTPException(404, f"unknown skill: {exc}") from exc

    @app.post("/shortlist/{task_id}/confirm")
    def post_confirm(task_id: str, body: ConfirmBody):
        session = session_or_404(task_id)
        require_stage(session, "retrieved")
        if session.shortlist is None:
            raise HTTPException(400, "a recipe consent decision is pending for this task")
        try:
            final = finalize_selection(session.shortlist, set(body.add), state.registry)
        except UnknownSkill as exc:
            raise HTTPException(404, f"unknown skill: {exc}") from exc
        session.shortlist = final
        session.selection = final.ids
        session.stage = "shortlist_confirmed"
        return _session_view(session)

    # -- planning ------------------------------------------------------------

    @app.post("/plans")
    def post_plans(body: PlansBody):
        session = session_or_404(body.task_id)
        require_stage(session, "shortlist_confirmed")
        skills = [state.registry.get(skill_id) for skill_id in session.selection]
        try:
            session.plan_set = generate_plan_set(session.description, skills, state.gateway)
        except SkillOSError as exc:
            raise HTTPException(400, str(exc)) from exc
        session.stage = "plans_ready"
        return _session_view(session)

    @app.post("/plans/{task_id}/select")
    def post_select(task_id: str, body: SelectBody):
        session = session_or_404(task_id)
        if session.stage == "plan_selected":
            raise HTTPException(409, "a plan is already selected for this task")
        require_stage(session, "plans_ready")
        assert session.plan_set is not None
        for plan in session.plan_set.plans.values():
            if plan.plan_id == body.plan_id:
                session.selected_plan = plan
                session.stage = "plan_selected"
                return _session_view(session)
        raise HTTPException(404, f"unknown plan {body.plan_id}")

    # -- execution ------------------------------------------------------------

    @app.post("/runs")
    def post_run(body: RunBody):
        session = session_or_404(body.task_id)
        require_stage(session, "plan_selected")
        assert session.selected_plan is not None
        run_id = f"run-{uuid.uuid4().hex[:10]}"
        session.run_id = run_id
        session.stage = "running"
        plan = session.selected_plan
        skills = {
            node.sub_task.skill_id: state.registry.get(node.sub_task.skill_id)
            for node in plan.nodes
        }

        placeholder = RunState(
            run_id=run_id, plan=plan, task=session.description,
            workspace=state.workspace / "runs" / run_id,
        )
        placeholder.workspace.mkdir(parents=True, exist_ok=True)
        state.runs[run_id] = placeholder

        def execute() -> None:
            try:
                run = run_plan(
                    plan,
                    session.description,
                    state.executor_backend,
                    skills,
                    state.workspace,
                    run_id=run_id,
                    max_workers=state.config.layer_concurrency,
                    on_start=lambda live: state.runs.__setitem__(run_id, live),
                )
                if run.overall == "succeeded" and not session.from_recipe:
                    store_recipe(session.description, plan, state.gateway, state.recipes, run=run)
            except Exception:  # noqa: BLE001 - a crashed run must not kill the server
                state.runs[run_id].emit(None, "failed")
            finally:
                session.stage = "done"

        threading.Thread(target=execute, daemon=True).start()
        return {"run_id": run_id, "task_id": session.task_id, "stage": session.stage}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        run = state.runs.get(run_id)
        if run is None:
            raise HTTPException(404, f"unknown run {run_id}")
        return run.snapshot()

    @app.get("/runs/{run_id}/events")
    def get_run_events(run_id: str):
        run = state.runs.get(run_id)
        if run is None:
            raise HTTPException(404, f"unknown run {run_id}")

        def stream() -> Iterator[str]:
            cursor = 0
            while True:
                current = state.runs.get(run_id, run)
                events = list(current.events)
                while cursor < len(events):
                    yield json.dumps(events[cursor].to_document(), sort_keys=True) + "\n"
                    cursor += 1
                if current.overall in ("succeeded", "failed") and cursor >= len(current.events):
                    return
                time.sleep(0.02)

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.post("/runs/{task_id}/consent")
    def post_consent(task_id: str, body: ConsentBody):
        session = session_or_404(task_id)
        require_stage(session, "retrieved")
        if session.recipe_hit is None:
            raise HTTPException(400, "no recipe hit pending consent for this task")
        hit = session.recipe_hit
        session.recipe_hit = None
        if body.accept:
            session.selected_plan = OrchestrationPlan.from_document(hit["plan"])
            session.from_recipe = True
            session.stage = "plan_selected"
            state.recipes.record_use(hit["recipe_id"])
        else:
            session.shortlist = _run_retrieval(state, session, [])
        return _session_view(session)

    # -- recipes and rankings ---------------------------------------------------

    @app.get("/recipes")
    def get_recipes():
        return {
            "recipes": [
                {
                    "recipe_id": recipe.recipe_id,
                    "task_text": recipe.task_text,
                    "created_at": recipe.created_at,
                    "use_count": recipe.use_count,
                }
                for recipe in state.recipes.recipes
            ]
        }

    @app.post("/eval/compare")
    def post_compare(body: CompareBody):
        converters = state.config.build_converters()
        try:
            rendered_i = convert_artifacts(body.dir_i, converters, state.config.text_limit)
            rendered_j = convert_artifacts(body.dir_j, converters, state.config.text_limit)
        except FileNotFoundError as exc:
            raise HTTPException(404, str(exc)) from exc
        outcome = debiased_compare(
            rendered_i,
            rendered_j,
            body.task or body.task_id,
            state.gateway,
            task_id=body.task_id,
            system_i=body.system_i,
            system_j=body.system_j,
        )
        append_outcome(state.workspace / "outcomes.jsonl", outcome)
        return {
            "task_id": outcome.task_id,
            "system_i": outcome.system_i,
            "system_j": outcome.system_j,
            "result": outcome.result,
        }

    @app.get("/rankings")
    def get_rankings():
        outcomes = load_outcomes(state.workspace / "outcomes.jsonl")
        if not outcomes:
            raise HTTPException(404, "no recorded outcomes")
        systems = sorted({o.system_i for o in outcomes} | {o.system_j for o in outcomes})
        scores = rank_systems(aggregate(outcomes, systems))
        return scores.report()

    return app


def _session_view(session: Session) -> dict:
    view: dict = {"task_id": session.task_id, "stage": session.stage}
    if session.shortlist is not None:
        view["shortlist"] = session.shortlist.to_document()
    if session.selection:
        view["selection"] = list(session.selection)
    if session.plan_set is not None:
        view["plans"] = {
            name: {**plan.to_document(), "metrics": plan_metrics(plan).to_document()}
            for name, plan in session.plan_set.plans.items()
        }
        view["plan_failures"] = dict(session.plan_set.failures)
    if session.selected_plan is not None:
        view["selected_plan"] = session.selected_plan.to_document()
    if session.recipe_hit is not None:
        view["recipe_hit"] = session.recipe_hit
    if session.run_id:
        view["run_id"] = session.run_id
    return view


def serve(config: Config, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
