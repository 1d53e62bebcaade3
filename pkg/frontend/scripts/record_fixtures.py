#!/usr/bin/env python3
"""Record API response fixtures for the console contract tests.

Boots the service in-process with scripted backends, drives a full
session, and freezes each wire response under frontend/tests/fixtures/.
Run from the repository root: python3 frontend/scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

from fastapi.testclient import TestClient

from skillos.executor import ScriptedExecutorBackend, run_plan, store_recipe
from skillos.gateway import HashingEmbedder
from skillos.orchestrator import ExpectedOutput, SubTask, build_plan
from skillos.registry import load_skill
from skillos.service import create_app
from tests.test_service import TASK_TEXT, build_workspace
from tests.conftest import write_skill_folder

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def dump(name: str, document) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / name).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    print(f"wrote {name}")


def wait_done(client: TestClient, run_id: str) -> dict:
    for _ in range(200):
        snapshot = client.get(f"/runs/{run_id}").json()
        if snapshot["overall"] in ("succeeded", "failed"):
            return snapshot
        time.sleep(0.05)
    raise RuntimeError("run did not finish")


def record_session(tmp: Path) -> None:
    config = build_workspace(tmp)
    app = create_app(config)
    with TestClient(app) as client:
        dump("tree.json", client.get("/tree").json())
        root = client.get("/tree").json()["root"]
        dump("tree_root_node.json", client.get(f"/tree/{root}").json())

        view = client.post("/retrieve", json={"description": TASK_TEXT}).json()
        dump("retrieve.json", view)
        task_id = view["task_id"]

        added = "slides-deckmaker-00"  # present in the registry, outside the shortlist
        confirmed = client.post(f"/shortlist/{task_id}/confirm", json={"add": [added]}).json()
        dump("confirm.json", confirmed)

        plans = client.post("/plans", json={"task_id": task_id}).json()
        dump("plans.json", plans)

        plan_id = plans["plans"]["quality_first"]["plan_id"]
        dump("select.json", client.post(f"/plans/{task_id}/select", json={"plan_id": plan_id}).json())

        created = client.post("/runs", json={"task_id": task_id}).json()
        dump("run_created.json", created)
        dump("run_final.json", wait_done(client, created["run_id"]))

        rich = tmp / "rich"
        rich.mkdir()
        for index in range(3):
            (rich / f"part{index}.txt").write_text("substantial " * 60)
        poor = tmp / "poor"
        poor.mkdir()
        (poor / "thin.txt").write_text("x")
        for eval_task in ("e1", "e2"):
            client.post(
                "/eval/compare",
                json={
                    "task_id": eval_task,
                    "system_i": "rich", "system_j": "poor",
                    "dir_i": str(rich), "dir_j": str(poor),
                },
            )
        dump("rankings.json", client.get("/rankings").json())

        # consent paths need a seeded recipe; use fresh sessions
        state = client.app.state.service
        seed_skill = sorted(state.registry.eco.skills)[0]
        seed_plan = build_plan([SubTask("solo", "reuse the stored pipeline", seed_skill, set())],
                               "quality_first")
        store_recipe(TASK_TEXT, seed_plan, HashingEmbedder(), state.recipes)

        hit_view = client.post("/retrieve", json={"description": TASK_TEXT}).json()
        dump("retrieve_hit.json", hit_view)
        dump(
            "consent_accept.json",
            client.post(f"/runs/{hit_view['task_id']}/consent", json={"accept": True}).json(),
        )
        second = client.post("/retrieve", json={"description": TASK_TEXT}).json()
        dump(
            "consent_decline.json",
            client.post(f"/runs/{second['task_id']}/consent", json={"accept": False}).json(),
        )


def record_diamond_events(tmp: Path) -> None:
    folder = write_skill_folder(tmp / "skills2", "workhorse", "does everything")
    skill = load_skill(folder)
    plan = build_plan(
        [
            SubTask("A", "start", skill.id, set(), [ExpectedOutput("A-out.txt", "seed")]),
            SubTask("B", "left", skill.id, {"A"}, [ExpectedOutput("B-out.txt", "left")]),
            SubTask("C", "right", skill.id, {"A"}, [ExpectedOutput("C-out.txt", "right")]),
            SubTask("D", "join", skill.id, {"B", "C"}, [ExpectedOutput("D-out.txt", "final")]),
        ],
        "quality_first",
    )
    run = run_plan(
        plan, "diamond fixture task", ScriptedExecutorBackend(sleep=0.05),
        {skill.id: skill}, tmp / "runs-d", run_id="run-diamond01",
    )
    dump("events_diamond.json", [event.to_document() for event in run.events])
    dump("plan_diamond.json", plan.to_document())


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        record_session(Path(tmp))
        record_diamond_events(Path(tmp))
