"""Command-line surface for the whole pipeline.

Every subcommand wraps one module operation, prints JSON to stdout,
and exits 0 on success, 1 on domain errors, 2 on usage errors.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .config import Config
from .errors import SkillOSError
from .evaluation import (
    WinMatrix,
    aggregate,
    append_outcome,
    convert_artifacts,
    debiased_compare,
    load_outcomes,
    per_category_scores,
    rank_systems,
)
from .executor import run_plan as execute_plan
from .orchestrator import (
    OrchestrationPlan,
    generate_plan_set,
    plan_metrics,
    strategy_from_alias,
)
from .registry import Registry, build_dormant_index, load_skill, select_active_set
from .retrieval import TaskRequest, retrieve
from .tree import CapabilityTree, build_tree, insert_skill, validate_tree


def emit(document) -> None:
    click.echo(json.dumps(document, indent=2, sort_keys=True))


def domain_errors(func):
    """Map domain failures to exit code 1 with a JSON error on stderr."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (SkillOSError, FileNotFoundError, ValueError) as exc:
            click.echo(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--workspace", default=None, help="Workspace directory (overrides config).")
@click.option("--gateway", "gateway_backend", type=click.Choice(["scripted", "http"]), default=None)
@click.option("--fixtures", "fixtures_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def main(ctx, config_path, workspace, gateway_backend, fixtures_path):
    """Skill ecosystem operating layer."""
    try:
        ctx.obj = Config.from_sources(
            config_path,
            overrides={
                "workspace": workspace,
                "gateway_backend": gateway_backend,
                "fixtures_path": fixtures_path,
            },
        )
    except (SkillOSError, ValueError) as exc:
        click.echo(json.dumps({"error": str(exc)}), err=True)
        sys.exit(1)


def _workspace(config: Config) -> Path:
    path = config.workspace_path()
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_registry(config: Config) -> Registry:
    path = _workspace(config) / "registry.json"
    if not path.is_file():
        raise SkillOSError(f"no registry at {path}; run `skillos tree build` first")
    return Registry.load(path)


def _load_tree(config: Config) -> CapabilityTree:
    path = _workspace(config) / "tree.json"
    if not path.is_file():
        raise SkillOSError(f"no tree at {path}; run `skillos tree build` first")
    return CapabilityTree.load(path)


# --------------------------------------------------------------------------
# tree subcommands
# --------------------------------------------------------------------------


@main.group()
def tree():
    """Build, update, and inspect the capability tree."""


@tree.command("build")
@click.option("--skills-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--b", "branching", type=int, default=None, help="Branching factor.")
@click.option("--k", "top_k", type=int, default=None, help="Active-set size.")
@click.pass_obj
@domain_errors
def tree_build(config: Config, skills_dir, branching, top_k):
    """Ingest skill folders, select the active set, and build the tree."""
    from .tree import TreeConfig

    tree_cfg = TreeConfig.from_branching(branching) if branching is not None else config.tree_config()
    active_k = top_k if top_k is not None else config.k
    registry = Registry()
    for entry in sorted(Path(skills_dir).iterdir()):
        if entry.is_dir() and (entry / "SKILL.md").is_file():
            registry.register_folder(entry)
    if not len(registry):
        raise SkillOSError(f"no skill folders under {skills_dir}")
    active = select_active_set(registry.eco, active_k)
    gateway = config.build_gateway()
    built = build_tree(
        {skill_id: registry.get(skill_id) for skill_id in active},
        tree_cfg,
        gateway,
    )
    workspace = _workspace(config)
    registry.save(workspace / "registry.json")
    built.save(workspace / "tree.json")
    emit(
        {
            "skills": len(registry),
            "active": len(active),
            "nodes": len(built.nodes),
            "leaves": len(built.leaves()),
            "tree": str(workspace / "tree.json"),
        }
    )


@tree.command("insert")
@click.option("--skill-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.pass_obj
@domain_errors
def tree_insert(config: Config, skill_dir):
    """Insert one new skill folder into the existing tree."""
    registry = _load_registry(config)
    current = _load_tree(config)
    skill = load_skill(skill_dir)
    if skill.id not in registry:
        registry.register(skill)
    updated, path = insert_skill(current, skill, config.build_gateway())
    workspace = _workspace(config)
    registry.save(workspace / "registry.json")
    updated.save(workspace / "tree.json")
    emit({"inserted": skill.id, "path": path, "leaves": len(updated.leaves())})


@tree.command("validate")
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_obj
@domain_errors
def tree_validate(config: Config, tree_path):
    """Check every structural invariant of a tree."""
    current = CapabilityTree.load(tree_path) if tree_path else _load_tree(config)
    violations = validate_tree(current)
    emit({"violations": violations})
    if violations:
        sys.exit(1)


@tree.command("show")
@click.option("--node", "node_id", default=None)
@click.pass_obj
@domain_errors
def tree_show(config: Config, node_id):
    """Print the tree, or one node with its children."""
    current = _load_tree(config)
    if node_id is None:
        emit(current.to_document())
        return
    if node_id not in current.nodes:
        raise SkillOSError(f"unknown node {node_id}")
    node = current.node(node_id)
    emit(
        {
            "node_id": node.node_id,
            "name": node.name,
            "description": node.description,
            "kind": node.kind,
            "skill_ids": sorted(node.skill_ids),
            "children": [
                {"node_id": c.node_id, "name": c.name, "kind": c.kind, "skills": len(c.skill_ids)}
                for c in current.children_of(node_id)
            ],
        }
    )


# --------------------------------------------------------------------------
# retrieval and planning
# --------------------------------------------------------------------------


def _read_task(task: str | None, task_file: str | None) -> str:
    if task:
        return task
    if task_file:
        return Path(task_file).read_text(encoding="utf-8").strip()
    raise SkillOSError("provide --task or --task-file")


@main.command("retrieve")
@click.option("--task", default=None)
@click.option("--task-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--add", "added", multiple=True, help="Extra skill ids to force into the selection.")
@click.pass_obj
@domain_errors
def retrieve_command(config: Config, task, task_file, added):
    """Print the pruned, ranked shortlist for a task."""
    description = _read_task(task, task_file)
    registry = _load_registry(config)
    current = _load_tree(config)
    gateway = config.build_gateway()
    active = set(current.nodes[current.root].skill_ids)
    dormant = build_dormant_index(registry.eco, active, gateway)
    request = TaskRequest(
        task_id="cli",
        description=description,
        embedding=gateway.embed(description),
        user_added_ids=set(added),
    )
    shortlist = retrieve(
        current, request, gateway, registry, dormant, m=config.m, dormant_n=config.dormant_n
    )
    emit(shortlist.to_document())


@main.command("plan")
@click.option("--task", default=None)
@click.option("--task-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--strategy", default="all", help="all|quality|efficiency|simplicity")
@click.option("--skills", "skill_ids", default=None, help="Comma-separated skill ids (skips retrieval).")
@click.pass_obj
@domain_errors
def plan_command(config: Config, task, task_file, strategy, skill_ids):
    """Generate orchestration plans for a task."""
    description = _read_task(task, task_file)
    registry = _load_registry(config)
    gateway = config.build_gateway()
    if skill_ids:
        selected = [registry.get(skill_id.strip()) for skill_id in skill_ids.split(",")]
    else:
        current = _load_tree(config)
        active = set(current.nodes[current.root].skill_ids)
        dormant = build_dormant_index(registry.eco, active, gateway)
        request = TaskRequest(
            task_id="cli", description=description, embedding=gateway.embed(description)
        )
        shortlist = retrieve(
            current, request, gateway, registry, dormant, m=config.m, dormant_n=config.dormant_n
        )
        selected = [registry.get(skill_id) for skill_id in shortlist.ids]
        if not selected:
            raise SkillOSError("retrieval produced an empty shortlist")
    plan_set = generate_plan_set(description, selected, gateway)
    if strategy == "all":
        document = plan_set.to_document()
        document["metrics"] = {
            name: plan_metrics(plan).to_document() for name, plan in plan_set.plans.items()
        }
        emit(document)
        return
    name = strategy_from_alias(strategy)
    if name not in plan_set.plans:
        raise SkillOSError(f"strategy {name} failed: {plan_set.failures.get(name, 'unknown')}")
    plan = plan_set.plans[name]
    document = plan.to_document()
    document["metrics"] = plan_metrics(plan).to_document()
    emit(document)


@main.command("run")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--task", default=None)
@click.option("--task-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_obj
@domain_errors
def run_command(config: Config, plan_path, task, task_file):
    """Execute a plan file layer by layer."""
    document = json.loads(Path(plan_path).read_text(encoding="utf-8"))
    plan = OrchestrationPlan.from_document(document)
    description = task or (
        Path(task_file).read_text(encoding="utf-8").strip() if task_file else document.get("task", "")
    )
    registry = _load_registry(config)
    skills = {
        node.sub_task.skill_id: registry.get(node.sub_task.skill_id) for node in plan.nodes
    }
    run = execute_plan(
        plan,
        description,
        config.build_executor_backend(),
        skills,
        _workspace(config),
        max_workers=config.layer_concurrency,
    )
    emit(run.snapshot())
    if run.overall != "succeeded":
        sys.exit(1)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


@main.group("eval")
def eval_group():
    """Pairwise judging, aggregation, and ranking."""


@eval_group.command("compare")
@click.option("--task-id", required=True)
@click.option("--task", default=None, help="Task text shown to the judge (defaults to task id).")
@click.option("--system-a", required=True)
@click.option("--dir-a", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--system-b", required=True)
@click.option("--dir-b", required=True, type=click.Path(exists=True, file_okay=False))
@click.pass_obj
@domain_errors
def eval_compare(config: Config, task_id, task, system_a, dir_a, system_b, dir_b):
    """Judge two systems' artifacts in both orders and log the outcome."""
    gateway = config.build_gateway()
    converters = config.build_converters()
    rendered_a = convert_artifacts(dir_a, converters, config.text_limit)
    rendered_b = convert_artifacts(dir_b, converters, config.text_limit)
    outcome = debiased_compare(
        rendered_a,
        rendered_b,
        task or task_id,
        gateway,
        task_id=task_id,
        system_i=system_a,
        system_j=system_b,
    )
    append_outcome(_workspace(config) / "outcomes.jsonl", outcome)
    emit(
        {
            "task_id": outcome.task_id,
            "system_i": outcome.system_i,
            "system_j": outcome.system_j,
            "result": outcome.result,
        }
    )


@eval_group.command("aggregate")
@click.option("--outcomes", "outcomes_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_obj
@domain_errors
def eval_aggregate(config: Config, outcomes_path, out_path):
    """Fold the outcome log into a win-matrix CSV."""
    path = Path(outcomes_path) if outcomes_path else _workspace(config) / "outcomes.jsonl"
    outcomes = load_outcomes(path)
    if not outcomes:
        raise SkillOSError(f"no outcomes in {path}")
    systems = sorted({o.system_i for o in outcomes} | {o.system_j for o in outcomes})
    matrix = aggregate(outcomes, systems)
    matrix.to_csv(out_path)
    emit({"systems": systems, "comparisons": len(outcomes), "matrix": str(out_path)})


@eval_group.command("rank")
@click.option("--matrix", "matrix_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--outcomes", "outcomes_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--categories", "categories_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON map of task_id to category for per-category refits.")
@click.pass_obj
@domain_errors
def eval_rank(config: Config, matrix_path, outcomes_path, categories_path):
    """Fit strengths and print the ranking report."""
    if matrix_path:
        matrix = WinMatrix.from_csv(matrix_path)
        emit(rank_systems(matrix).report())
        return
    path = Path(outcomes_path) if outcomes_path else _workspace(config) / "outcomes.jsonl"
    outcomes = load_outcomes(path)
    if not outcomes:
        raise SkillOSError(f"no outcomes in {path}")
    if categories_path:
        labels = json.loads(Path(categories_path).read_text(encoding="utf-8"))
        report = {
            category: scores.report()
            for category, scores in per_category_scores(outcomes, labels).items()
        }
        emit(report)
        return
    systems = sorted({o.system_i for o in outcomes} | {o.system_j for o in outcomes})
    emit(rank_systems(aggregate(outcomes, systems)).report())


# --------------------------------------------------------------------------
# service
# --------------------------------------------------------------------------


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.pass_obj
@domain_errors
def serve_command(config: Config, host, port):
    """Run the HTTP service."""
    from .service import serve

    serve(config, host=host, port=port)


if __name__ == "__main__":
    main()
