"""Deterministic rule-based responders for the scripted gateway.

These provide the declared per-role fallbacks so the full pipeline runs
offline: grouping by leading name tokens, assignment and descent by token
overlap, traversal with an inclusive fallback, ranking by task overlap,
strategy-shaped decompositions, and a judge that prefers the richer side.
Every handler is a pure function of its payload, which keeps the scripted
gateway replay-deterministic.
"""

from __future__ import annotations

import hashlib
import re
from typing import Any, Mapping

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Function words carry no signal for overlap scoring.
_STOPWORDS = frozenset(
    "a an and are as at be by for from in into is it of on or other out over "
    "plus that the their this to toward under upon using via with within".split()
)


def tokens(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower())) - _STOPWORDS


def _bucket(key: str, parts: int) -> int:
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "big") % max(parts, 1)


def _topic(name: str) -> str:
    found = _TOKEN_RE.findall(name.lower())
    return found[0] if found else "misc"


# --------------------------------------------------------------------------
# tree construction roles
# --------------------------------------------------------------------------


def group_discovery(payload: Mapping[str, Any]) -> dict:
    mode = payload.get("mode", "discover")
    if mode == "refresh":
        group = payload["group"]
        count = len(payload.get("skills", []))
        return {
            "groups": [
                {
                    "name": group["name"],
                    "description": f"{group['name']} capabilities covering {count} skills",
                }
            ]
        }
    if mode == "split":
        return {"groups": _split_to_range(payload)}

    skills = payload["skills"]
    lo = payload["target"]["min"]
    hi = payload["target"]["max"]
    buckets: dict[str, list[str]] = {}
    for skill in skills:
        buckets.setdefault(_topic(skill["name"]), []).append(skill["id"])
    topics = sorted(buckets, key=lambda t: (-len(buckets[t]), t))

    if len(topics) > hi:
        kept, dropped = topics[: hi - 1], topics[hi - 1 :]
        groups = [{"name": t, "description": f"skills about {t}"} for t in kept]
        groups.append({"name": "misc", "description": "other skills: " + " ".join(dropped)})
        return {"groups": groups}

    groups = [{"name": t, "description": f"skills about {t}"} for t in topics]
    while len(groups) < lo:
        base = groups.pop(0) if groups else {"name": "misc", "description": "assorted skills"}
        groups.extend(
            [
                {"name": f"{base['name']} part-1", "description": base["description"]},
                {"name": f"{base['name']} part-2", "description": base["description"]},
            ]
        )
    return {"groups": groups}


def _split_to_range(payload: Mapping[str, Any]) -> list[dict]:
    groups = [dict(g) for g in payload["groups"]]
    lo = payload["target"]["min"]
    while len(groups) < lo and groups:
        base = groups.pop(0)
        groups.extend(
            [
                {"name": f"{base['name']} part-1", "description": base["description"]},
                {"name": f"{base['name']} part-2", "description": base["description"]},
            ]
        )
    return groups


def skill_assignment(payload: Mapping[str, Any]) -> dict:
    groups = payload["groups"]
    assignments: dict[str, int] = {}
    for skill in payload["skills"]:
        name_tokens = tokens(skill["name"])
        all_tokens = name_tokens | tokens(skill.get("description", ""))
        scores = []
        for group in groups:
            group_name_tokens = tokens(group["name"])
            group_all = group_name_tokens | tokens(group.get("description", ""))
            scores.append(3 * len(group_name_tokens & name_tokens) + len(group_all & all_tokens))
        best = max(scores)
        if best == 0:
            continue  # left unassigned; the caller's repair passes take over
        top = [i for i, score in enumerate(scores) if score == best]
        assignments[skill["id"]] = top[_bucket(skill["id"], len(top))]
    return {"assignments": assignments}


def category_descent(payload: Mapping[str, Any]) -> dict:
    skill = payload["skill"]
    skill_tokens = tokens(skill["name"]) | tokens(skill.get("description", ""))
    scores = []
    for option in payload["options"]:
        option_tokens = tokens(option["name"]) | tokens(option.get("description", ""))
        scores.append(len(option_tokens & skill_tokens))
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return {"choice": best}


# --------------------------------------------------------------------------
# retrieval roles
# --------------------------------------------------------------------------


def tree_traversal(payload: Mapping[str, Any]) -> dict:
    task_tokens = tokens(payload["task"])
    matching = [
        option["node_id"]
        for option in payload["options"]
        if task_tokens & (tokens(option["name"]) | tokens(option.get("description", "")))
    ]
    if matching:
        return {"selected": matching}
    # Nothing matched: stay inclusive and explore every branch.
    return {"selected": [option["node_id"] for option in payload["options"]]}


def prune_rank(payload: Mapping[str, Any]) -> dict:
    task_tokens = tokens(payload["task"])
    scored = []
    for skill in payload["skills"]:
        overlap = len(task_tokens & (tokens(skill["name"]) | tokens(skill.get("description", ""))))
        scored.append((overlap, skill["id"]))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return {
        "skills": [
            {
                "skill_id": skill_id,
                "keep": overlap > 0,
                "rank": position,
                "rationale": f"shares {overlap} task term(s)",
            }
            for position, (overlap, skill_id) in enumerate(scored, start=1)
        ]
    }


# --------------------------------------------------------------------------
# orchestration role
# --------------------------------------------------------------------------


def decompose(payload: Mapping[str, Any]) -> dict:
    strategy = payload["strategy"]
    skills = sorted(payload["skills"], key=lambda s: s["id"])
    task = payload["task"]

    def step(index: int, skill: dict, depends: list[str]) -> dict:
        sub_id = f"s{index}"
        return {
            "sub_id": sub_id,
            "objective": f"apply {skill['name']} toward: {task[:120]}",
            "skill_id": skill["id"],
            "depends_on": depends,
            "expected_outputs": [
                {"pattern": f"{sub_id}-output.txt", "purpose": f"result of {skill['id']}"}
            ],
        }

    if strategy == "simplicity_first":
        sub_tasks = []
        for index, skill in enumerate(skills, start=1):
            depends = [f"s{index - 1}"] if index > 1 else []
            sub_tasks.append(step(index, skill, depends))
        return {"sub_tasks": sub_tasks}

    if strategy == "efficiency_first":
        sub_tasks = [step(index, skill, []) for index, skill in enumerate(skills, start=1)]
        sub_tasks.append(
            {
                "sub_id": "assemble",
                "objective": f"combine parallel outputs for: {task[:120]}",
                "skill_id": skills[-1]["id"],
                "depends_on": [st["sub_id"] for st in sub_tasks],
                "expected_outputs": [
                    {"pattern": "assemble-output.txt", "purpose": "combined deliverable"}
                ],
            }
        )
        return {"sub_tasks": sub_tasks}

    # quality_first: shared preparation, one stage per skill, final refinement
    sub_tasks = [
        {
            "sub_id": "prepare",
            "objective": f"gather references and draft structure for: {task[:120]}",
            "skill_id": skills[0]["id"],
            "depends_on": [],
            "expected_outputs": [{"pattern": "prepare-output.txt", "purpose": "working notes"}],
        }
    ]
    for index, skill in enumerate(skills, start=1):
        sub_tasks.append(step(index, skill, ["prepare"]))
    sub_tasks.append(
        {
            "sub_id": "refine",
            "objective": f"polish and consolidate the deliverable for: {task[:120]}",
            "skill_id": skills[-1]["id"],
            "depends_on": [st["sub_id"] for st in sub_tasks if st["sub_id"] != "prepare"],
            "expected_outputs": [
                {"pattern": "refine-output.txt", "purpose": "final polished deliverable"}
            ],
        }
    )
    return {"sub_tasks": sub_tasks}


# --------------------------------------------------------------------------
# judging role
# --------------------------------------------------------------------------


def _richness(side: list[dict]) -> int:
    total = 0
    for view in side:
        if view.get("metadata", {}).get("unrenderable"):
            continue
        total += 50  # each renderable artifact counts
        total += len(view.get("content", ""))
        total += 5000 * len(view.get("images", []))
    return total


def judge(payload: Mapping[str, Any]) -> dict:
    first = _richness(payload["first"])
    second = _richness(payload["second"])
    # Ties deliberately lean on presentation order; the double-ordering
    # protocol around this call is what neutralizes that bias.
    preference = "first" if first >= second else "second"
    return {
        "preference": preference,
        "rationale": f"first side richness {first} vs second side {second}",
    }


def node_execute(payload: Mapping[str, Any]) -> dict:
    return {"report": f"executed {payload.get('sub_task', {}).get('sub_id', 'node')}"}


def default_fallbacks() -> dict:
    return {
        "group_discovery": group_discovery,
        "skill_assignment": skill_assignment,
        "category_descent": category_descent,
        "tree_traversal": tree_traversal,
        "prune_rank": prune_rank,
        "decompose": decompose,
        "judge": judge,
        "node_execute": node_execute,
    }
