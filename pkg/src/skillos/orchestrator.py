"""Task decomposition and layered DAG plan construction.

The task is decomposed once per orchestration strategy into sub-tasks
bound to selected skills, then compiled into a validated DAG whose layer
function is the longest-path layering: sources sit at layer 0 and every
edge strictly increases the layer.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    CyclicDependency,
    DanglingDependency,
    EmptyDecomposition,
    PlanGenerationError,
    SkillOSError,
)
from .gateway import ChatCall
from .registry import Skill

logger = logging.getLogger(__name__)

STRATEGIES = ("quality_first", "efficiency_first", "simplicity_first")

# Prompt charter handed to the decomposition call for each strategy.
STRATEGY_CHARTERS: dict[str, str] = {
    "quality_first": (
        "Optimize for the quality of every deliverable. Lean on each skill where it is "
        "strongest, and insert extra preparation or refinement steps whenever they would "
        "raise the quality of the final output, even at the cost of a longer pipeline."
    ),
    "efficiency_first": (
        "Optimize for parallel execution. Keep dependency chains as short as possible and "
        "arrange independent sub-tasks so they can run at the same time whenever their "
        "inputs allow it."
    ),
    "simplicity_first": (
        "Produce the smallest workable pipeline. Include a step only if the task cannot be "
        "completed without it; prefer one step per skill and no optional extras."
    ),
}


@dataclass
class ExpectedOutput:
    pattern: str
    purpose: str = ""


@dataclass
class SubTask:
    sub_id: str
    objective: str
    skill_id: str
    depends_on: set[str] = field(default_factory=set)
    expected_outputs: list[ExpectedOutput] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.sub_id in self.depends_on:
            raise CyclicDependency([self.sub_id, self.sub_id])


@dataclass
class PlanNode:
    sub_task: SubTask
    layer: int


@dataclass
class OrchestrationPlan:
    plan_id: str
    strategy: str
    nodes: list[PlanNode]
    edges: list[tuple[str, str]]

    @property
    def sub_ids(self) -> list[str]:
        return [node.sub_task.sub_id for node in self.nodes]

    def node(self, sub_id: str) -> PlanNode:
        for node in self.nodes:
            if node.sub_task.sub_id == sub_id:
                return node
        raise KeyError(sub_id)

    def layer_of(self, sub_id: str) -> int:
        return self.node(sub_id).layer

    def predecessors(self, sub_id: str) -> list[str]:
        return [u for u, v in self.edges if v == sub_id]

    def successors(self, sub_id: str) -> list[str]:
        return [v for u, v in self.edges if u == sub_id]

    def to_document(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "strategy": self.strategy,
            "nodes": [
                {
                    "sub_id": node.sub_task.sub_id,
                    "skill_id": node.sub_task.skill_id,
                    "objective": node.sub_task.objective,
                    "expected_outputs": [
                        {"pattern": out.pattern, "purpose": out.purpose}
                        for out in node.sub_task.expected_outputs
                    ],
                    "layer": node.layer,
                }
                for node in self.nodes
            ],
            "edges": [[u, v] for u, v in self.edges],
        }

    @classmethod
    def from_document(cls, document: dict) -> "OrchestrationPlan":
        sub_tasks = []
        layers = {}
        for record in document["nodes"]:
            sub_tasks.append(
                SubTask(
                    sub_id=record["sub_id"],
                    objective=record["objective"],
                    skill_id=record["skill_id"],
                    expected_outputs=[
                        ExpectedOutput(out["pattern"], out.get("purpose", ""))
                        for out in record.get("expected_outputs", [])
                    ],
                    depends_on={u for u, v in document["edges"] if v == record["sub_id"]},
                )
            )
            layers[record["sub_id"]] = record["layer"]
        plan = build_plan(sub_tasks, document["strategy"], plan_id=document["plan_id"])
        for node in plan.nodes:
            if node.layer != layers[node.sub_task.sub_id]:
                raise ValueError(
                    f"stored layer for {node.sub_task.sub_id} disagrees with the dependency structure"
                )
        return plan


@dataclass
class PlanMetrics:
    node_count: int
    edge_count: int
    max_depth: int
    max_width: int

    def to_document(self) -> dict:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "max_depth": self.max_depth,
            "max_width": self.max_width,
        }


def decompose(
    task_description: str,
    selected: Sequence[Skill],
    strategy: str,
    gateway,
) -> list[SubTask]:
    """One decomposition call; sub-tasks bound outside the skill set are dropped."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not selected:
        raise ValueError("selected skill set must be non-empty")
    allowed = {skill.id for skill in selected}
    document = gateway.complete(
        ChatCall(
            "decompose",
            {
                "task": task_description,
                "strategy": strategy,
                "charter": STRATEGY_CHARTERS[strategy],
                "skills": [skill.card() for skill in sorted(selected, key=lambda s: s.id)],
            },
        )
    ).unwrap()
    sub_tasks: list[SubTask] = []
    dropped: set[str] = set()
    seen: set[str] = set()
    for record in document["sub_tasks"]:
        if record["sub_id"] in seen:
            raise ValueError(f"duplicate sub_id {record['sub_id']}")
        seen.add(record["sub_id"])
        if record["skill_id"] not in allowed:
            logger.warning(
                "sub-task %s references skill %s outside the selected set; dropped",
                record["sub_id"],
                record["skill_id"],
            )
            dropped.add(record["sub_id"])
            continue
        sub_tasks.append(
            SubTask(
                sub_id=record["sub_id"],
                objective=record["objective"],
                skill_id=record["skill_id"],
                depends_on=set(record.get("depends_on", [])),
                expected_outputs=[
                    ExpectedOutput(out["pattern"], out.get("purpose", ""))
                    for out in record.get("expected_outputs", [])
                ],
            )
        )
    if dropped:
        # References to dropped sub-tasks would dangle; cut them too.
        for sub_task in sub_tasks:
            sub_task.depends_on -= dropped
    if not sub_tasks:
        raise EmptyDecomposition(f"no usable sub-tasks for strategy {strategy}")
    return sub_tasks


def build_plan(
    sub_tasks: Sequence[SubTask], strategy: str, plan_id: str | None = None
) -> OrchestrationPlan:
    """Compile sub-tasks into a layered DAG; cycles and dangling deps are errors."""
    ids = [st.sub_id for st in sub_tasks]
    if len(ids) != len(set(ids)):
        raise ValueError("sub_ids must be unique")
    known = set(ids)
    edges: list[tuple[str, str]] = []
    for sub_task in sub_tasks:
        for dep in sorted(sub_task.depends_on):
            if dep not in known:
                raise DanglingDependency(f"{sub_task.sub_id} depends on unknown {dep}")
            edges.append((dep, sub_task.sub_id))

    order = _topological_order(ids, edges)
    layers: dict[str, int] = {}
    preds: dict[str, list[str]] = {sub_id: [] for sub_id in ids}
    for u, v in edges:
        preds[v].append(u)
    for sub_id in order:
        layers[sub_id] = max((layers[p] + 1 for p in preds[sub_id]), default=0)

    nodes = [PlanNode(sub_task=st, layer=layers[st.sub_id]) for st in sub_tasks]
    return OrchestrationPlan(
        plan_id=plan_id or uuid.uuid4().hex[:12],
        strategy=strategy,
        nodes=nodes,
        edges=edges,
    )


def _topological_order(ids: Sequence[str], edges: list[tuple[str, str]]) -> list[str]:
    indegree = {sub_id: 0 for sub_id in ids}
    successors: dict[str, list[str]] = {sub_id: [] for sub_id in ids}
    for u, v in edges:
        indegree[v] += 1
        successors[u].append(v)
    ready = sorted(sub_id for sub_id, degree in indegree.items() if degree == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in successors[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    if len(order) != len(ids):
        raise CyclicDependency(_find_cycle(ids, edges))
    return order


def _find_cycle(ids: Sequence[str], edges: list[tuple[str, str]]) -> list[str]:
    successors: dict[str, list[str]] = {sub_id: [] for sub_id in ids}
    for u, v in edges:
        successors[u].append(v)
    state: dict[str, int] = {}  # 0 unseen, 1 in progress, 2 done
    trail: list[str] = []

    def visit(node: str) -> list[str] | None:
        state[node] = 1
        trail.append(node)
        for nxt in successors[node]:
            if state.get(nxt, 0) == 1:
                return trail[trail.index(nxt):] + [nxt]
            if state.get(nxt, 0) == 0:
                found = visit(nxt)
                if found:
                    return found
        trail.pop()
        state[node] = 2
        return None

    for sub_id in ids:
        if state.get(sub_id, 0) == 0:
            cycle = visit(sub_id)
            if cycle:
                return cycle
    return []  # unreachable when called on a cyclic graph


@dataclass
class PlanSet:
    """One plan per strategy plus per-strategy failure notes."""

    plans: dict[str, OrchestrationPlan]
    failures: dict[str, str]

    def to_document(self) -> dict:
        return {
            "plans": {name: plan.to_document() for name, plan in self.plans.items()},
            "failures": dict(self.failures),
        }


def generate_plan_set(
    task_description: str, selected: Sequence[Skill], gateway
) -> PlanSet:
    """Decompose and compile under all three strategies; partial failure allowed."""
    plans: dict[str, OrchestrationPlan] = {}
    failures: dict[str, str] = {}
    for strategy in STRATEGIES:
        try:
            sub_tasks = decompose(task_description, selected, strategy, gateway)
            plans[strategy] = build_plan(sub_tasks, strategy)
        except SkillOSError as exc:
            failures[strategy] = str(exc)
    if not plans:
        raise PlanGenerationError(failures)
    return PlanSet(plans=plans, failures=failures)


def plan_metrics(plan: OrchestrationPlan) -> PlanMetrics:
    if not plan.nodes:
        return PlanMetrics(0, 0, 0, 0)
    layer_sizes: dict[int, int] = {}
    for node in plan.nodes:
        layer_sizes[node.layer] = layer_sizes.get(node.layer, 0) + 1
    return PlanMetrics(
        node_count=len(plan.nodes),
        edge_count=len(plan.edges),
        max_depth=1 + max(node.layer for node in plan.nodes),
        max_width=max(layer_sizes.values()),
    )


def validate_plan(plan: OrchestrationPlan, allowed_skills: Iterable[str] | None = None) -> list[str]:
    """Assert the layer contract and structural laws; empty list means valid."""
    problems: list[str] = []
    layer = {node.sub_task.sub_id: node.layer for node in plan.nodes}
    for u, v in plan.edges:
        if u not in layer or v not in layer:
            problems.append(f"edge ({u}, {v}) references unknown node")
        elif layer[u] >= layer[v]:
            problems.append(f"edge ({u}, {v}) does not increase the layer")
    preds: dict[str, list[str]] = {sub_id: [] for sub_id in layer}
    for u, v in plan.edges:
        if v in preds and u in layer:
            preds[v].append(u)
    for sub_id, level in layer.items():
        if level > 0 and not any(layer[p] == level - 1 for p in preds[sub_id]):
            problems.append(f"node {sub_id} at layer {level} has no predecessor one layer up")
    if allowed_skills is not None:
        allowed = set(allowed_skills)
        for node in plan.nodes:
            if node.sub_task.skill_id not in allowed:
                problems.append(
                    f"node {node.sub_task.sub_id} bound to skill {node.sub_task.skill_id} outside the selected set"
                )
    try:
        _topological_order(plan.sub_ids, plan.edges)
    except CyclicDependency as exc:
        problems.append(str(exc))
    return problems


def strategy_from_alias(alias: str) -> str:
    """Map CLI-friendly names onto canonical strategy identifiers."""
    normalized = alias.strip().lower().replace("-", "_")
    if normalized in STRATEGIES:
        return normalized
    prefixed = f"{normalized}_first"
    if prefixed in STRATEGIES:
        return prefixed
    raise ValueError(f"unknown strategy {alias!r}")
