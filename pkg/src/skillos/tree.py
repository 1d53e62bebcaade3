"""Capability tree: hierarchical organization of the active skill set.

The tree is built breadth-first by recursive categorization: each node
holding at least the capacity threshold of skills is split via a
group-discovery call followed by a skill-assignment call, with repair
passes for singleton groups, undersized groups, and unassigned skills.
Nodes below capacity stop recursing and turn their skills into leaves.
Built trees are immutable; insertion produces a fresh copy.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CategorizerFailure, DuplicateSkill, GatewayError
from .gateway import ChatCall, cosine
from .registry import Skill

logger = logging.getLogger(__name__)

# Fixed top-level partition used whenever the root is large enough to split.
ROOT_GROUPS: list[tuple[str, str]] = [
    ("content creation", "Producing documents, media, presentations, and other creative output"),
    ("data processing", "Analyzing, transforming, computing over, and visualizing data"),
    ("software development", "Writing, reviewing, testing, and maintaining code and systems"),
    ("automation", "Automating workflows, browsers, schedules, and repetitive operations"),
    ("domain-specific", "Specialized capabilities tied to a particular field or vertical"),
]


def derived_capacity(b: int) -> int:
    return math.floor(1.5 * b)


@dataclass(frozen=True)
class TreeConfig:
    b: int
    c: int

    def __post_init__(self) -> None:
        if self.b < 4:
            raise ValueError("branching factor must be >= 4")
        if self.c < 2:
            raise ValueError("capacity threshold must be >= 2")

    @classmethod
    def from_branching(cls, b: int) -> "TreeConfig":
        return cls(b=b, c=derived_capacity(b))


@dataclass
class Group:
    name: str
    description: str


@dataclass
class GroupProposal:
    groups: list[Group]


@dataclass
class CategoryNode:
    node_id: str
    name: str
    description: str
    children: list[str] = field(default_factory=list)
    skill_ids: set[str] = field(default_factory=set)
    kind: str = "category"  # "category" | "leaf"


@dataclass
class CapabilityTree:
    root: str
    nodes: dict[str, CategoryNode]
    config: TreeConfig

    def node(self, node_id: str) -> CategoryNode:
        return self.nodes[node_id]

    def children_of(self, node_id: str) -> list[CategoryNode]:
        return [self.nodes[child] for child in self.nodes[node_id].children]

    def leaves(self) -> list[CategoryNode]:
        return [node for node in self.nodes.values() if node.kind == "leaf"]

    def leaf_skill_ids(self) -> list[str]:
        ids = []
        for leaf in self.leaves():
            ids.extend(leaf.skill_ids)
        return ids

    def next_node_id(self) -> str:
        highest = max(int(node_id[1:]) for node_id in self.nodes)
        return f"n{highest + 1:04d}"

    # -- serialization (stable byte-for-byte) ---------------------------------

    def to_document(self) -> dict:
        return {
            "config": {"B": self.config.b, "C": self.config.c},
            "root": self.root,
            "nodes": {
                node_id: {
                    "name": node.name,
                    "description": node.description,
                    "kind": node.kind,
                    "children": list(node.children),
                    "skill_ids": sorted(node.skill_ids),
                }
                for node_id, node in self.nodes.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_document(cls, document: dict) -> "CapabilityTree":
        nodes = {
            node_id: CategoryNode(
                node_id=node_id,
                name=record["name"],
                description=record["description"],
                kind=record["kind"],
                children=list(record["children"]),
                skill_ids=set(record["skill_ids"]),
            )
            for node_id, record in document["nodes"].items()
        }
        config = TreeConfig(b=document["config"]["B"], c=document["config"]["C"])
        return cls(root=document["root"], nodes=nodes, config=config)

    @classmethod
    def load(cls, path: str | Path) -> "CapabilityTree":
        return cls.from_document(json.loads(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def build_tree(
    active_skills: Mapping[str, Skill] | Iterable[Skill],
    config: TreeConfig,
    gateway,
) -> CapabilityTree:
    """Categorize the active set into a capability tree, level by level."""
    if not isinstance(active_skills, Mapping):
        active_skills = {skill.id: skill for skill in active_skills}
    if not active_skills:
        raise ValueError("active skill set must be non-empty")
    try:
        return _TreeBuilder(active_skills, config, gateway).build()
    except GatewayError as exc:
        raise CategorizerFailure(f"tree build aborted: {exc}") from exc


class _TreeBuilder:
    def __init__(self, skills: Mapping[str, Skill], config: TreeConfig, gateway):
        self.skills = dict(skills)
        self.config = config
        self.gateway = gateway
        self.nodes: dict[str, CategoryNode] = {}
        self._counter = 0
        self._root_id = ""

    def build(self) -> CapabilityTree:
        root = self._new_node("skills", "All active skills", set(self.skills), "category")
        self._root_id = root.node_id
        frontier = [root.node_id]
        while frontier:
            next_frontier: list[str] = []
            for node_id in frontier:
                next_frontier.extend(self._expand(node_id))
            frontier = next_frontier
        return CapabilityTree(root=root.node_id, nodes=self.nodes, config=self.config)

    def _new_node(self, name: str, description: str, skill_ids: set[str], kind: str) -> CategoryNode:
        node = CategoryNode(
            node_id=f"n{self._counter:04d}",
            name=name,
            description=description,
            skill_ids=set(skill_ids),
            kind=kind,
        )
        self._counter += 1
        self.nodes[node.node_id] = node
        return node

    def _expand(self, node_id: str) -> list[str]:
        """Split one node; return the child ids that still need splitting."""
        node = self.nodes[node_id]
        size = len(node.skill_ids)
        if size < self.config.c:
            self._leafify(node)
            return []

        is_root = node.node_id == self._root_id
        all_in_one = False
        populated: list[tuple[Group, list[str]]] = []
        for attempt in (1, 2):
            proposal = discover_groups(
                node, self.skills, self.config, self.gateway, is_root=is_root, attempt=attempt
            )
            assignment = assign_skills(node, proposal, self.skills, self.gateway)
            populated = resolve_special_cases(node, proposal, assignment, self.gateway, self.skills)
            all_in_one = len(populated) == 1 and len(populated[0][1]) == size
            if not all_in_one:
                break
        if all_in_one:
            logger.warning(
                "assignment for node %s collapsed into one group twice; leafifying %d skills",
                node.node_id,
                size,
            )
            self._leafify(node)
            return []

        recurse: list[str] = []
        for group, skill_ids in populated:
            child = self._new_node(group.name, group.description, set(skill_ids), "category")
            node.children.append(child.node_id)
            if len(skill_ids) >= self.config.c:
                recurse.append(child.node_id)
            else:
                self._leafify(child)
        return recurse

    def _leafify(self, node: CategoryNode) -> None:
        """Turn every skill of a node into a direct leaf child."""
        for skill_id in sorted(node.skill_ids):
            skill = self.skills[skill_id]
            leaf = self._new_node(skill.name, skill.description, {skill_id}, "leaf")
            node.children.append(leaf.node_id)


# --------------------------------------------------------------------------
# categorization steps
# --------------------------------------------------------------------------


def _skill_cards(skills: Mapping[str, Skill], ids: Iterable[str]) -> list[dict]:
    return [skills[skill_id].card() for skill_id in sorted(ids)]


def _group_payload(groups: list[Group]) -> list[dict]:
    return [
        {"index": idx, "name": g.name, "description": g.description}
        for idx, g in enumerate(groups)
    ]


def discover_groups(
    node: CategoryNode,
    skills: Mapping[str, Skill],
    config: TreeConfig,
    gateway,
    is_root: bool = False,
    attempt: int = 1,
) -> GroupProposal:
    """Propose child groups for a node.

    The root always gets the fixed top-level partition. Elsewhere the model
    proposes; proposals outside [B-3, B+2] are retried once with feedback and
    then repaired deterministically (tail groups merged when too many, a
    split requested when too few).
    """
    if is_root:
        return GroupProposal([Group(name, description) for name, description in ROOT_GROUPS])
    lo, hi = config.b - 3, config.b + 2
    groups = _request_groups(node, skills, config, gateway, attempt=attempt)
    if len(groups) < lo or len(groups) > hi:
        groups = _request_groups(
            node, skills, config, gateway, attempt=attempt + 1, previous_count=len(groups)
        )
    if len(groups) > hi:
        while len(groups) > hi:
            absorbed = groups.pop()
            groups[-1] = Group(
                name=f"{groups[-1].name} / {absorbed.name}",
                description=f"{groups[-1].description} {absorbed.description}".strip(),
            )
    elif len(groups) < lo:
        groups = _split_groups(node, skills, config, gateway, groups, lo, hi)
    return GroupProposal(groups)


def _request_groups(
    node: CategoryNode,
    skills: Mapping[str, Skill],
    config: TreeConfig,
    gateway,
    attempt: int,
    previous_count: int | None = None,
) -> list[Group]:
    payload = {
        "mode": "discover",
        "node": {"name": node.name, "description": node.description},
        "skills": _skill_cards(skills, node.skill_ids),
        "target": {"min": config.b - 3, "max": config.b + 2, "branching": config.b},
        "attempt": attempt,
    }
    if previous_count is not None:
        payload["previous_count"] = previous_count
    document = gateway.complete(ChatCall("group_discovery", payload)).unwrap()
    return [Group(g["name"], g.get("description", "")) for g in document["groups"]]


def _split_groups(
    node: CategoryNode,
    skills: Mapping[str, Skill],
    config: TreeConfig,
    gateway,
    groups: list[Group],
    lo: int,
    hi: int,
) -> list[Group]:
    payload = {
        "mode": "split",
        "node": {"name": node.name, "description": node.description},
        "skills": _skill_cards(skills, node.skill_ids),
        "groups": _group_payload(groups),
        "target": {"min": lo, "max": hi},
    }
    result = gateway.complete(ChatCall("group_discovery", payload))
    if result.ok:
        candidate = [Group(g["name"], g.get("description", "")) for g in result.document["groups"]]
        if lo <= len(candidate) <= hi:
            return candidate
    # Last resort: bisect groups in place until the count reaches the range.
    while len(groups) < lo:
        base = groups.pop(0)
        groups.extend(
            [
                Group(f"{base.name} - part 1", base.description),
                Group(f"{base.name} - part 2", base.description),
            ]
        )
    return groups


def assign_skills(
    node: CategoryNode,
    proposal: GroupProposal,
    skills: Mapping[str, Skill],
    gateway,
    subset: Iterable[str] | None = None,
    attempt: int = 1,
) -> dict[str, int]:
    """Map each skill of a node to a proposed group index.

    The result may be partial: skills the model omits, or maps outside the
    proposal, stay unassigned and are handled downstream.
    """
    if not proposal.groups:
        raise ValueError("proposal must be non-empty")
    ids = set(subset) if subset is not None else set(node.skill_ids)
    payload = {
        "node": {"name": node.name, "description": node.description},
        "groups": _group_payload(proposal.groups),
        "skills": _skill_cards(skills, ids),
        "attempt": attempt,
    }
    document = gateway.complete(ChatCall("skill_assignment", payload)).unwrap()
    assignment: dict[str, int] = {}
    for skill_id, group_index in document["assignments"].items():
        if skill_id in ids and isinstance(group_index, int) and 0 <= group_index < len(proposal.groups):
            assignment[skill_id] = group_index
    return assignment


def resolve_special_cases(
    node: CategoryNode,
    proposal: GroupProposal,
    assignment: dict[str, int],
    gateway,
    skills: Mapping[str, Skill],
) -> list[tuple[Group, list[str]]]:
    """Repair an assignment into a lawful partition with no size-1 group.

    Unassigned skills get one more assignment pass, then fall into the
    largest group. Singleton groups are dissolved into the most relevant
    surviving group, whose name and description are refreshed.
    """
    members: list[list[str]] = [[] for _ in proposal.groups]
    for skill_id, group_index in assignment.items():
        members[group_index].append(skill_id)

    unassigned = sorted(set(node.skill_ids) - set(assignment))
    if unassigned:
        retry = assign_skills(node, proposal, skills, gateway, subset=unassigned, attempt=2)
        for skill_id, group_index in retry.items():
            members[group_index].append(skill_id)
        unassigned = sorted(set(unassigned) - set(retry))
    if unassigned:
        sizes = [len(m) for m in members]
        target = max(range(len(members)), key=lambda i: (sizes[i], -i))
        members[target].extend(unassigned)

    populated: list[tuple[Group, list[str]]] = [
        (group, sorted(ids)) for group, ids in zip(proposal.groups, members) if ids
    ]

    while len(populated) > 1:
        singleton_index = next(
            (i for i, (_, ids) in enumerate(populated) if len(ids) == 1), None
        )
        if singleton_index is None:
            break
        _, (lone_skill,) = populated.pop(singleton_index)
        target_index = _merge_target(lone_skill, [g for g, _ in populated], gateway, skills)
        target_group, target_ids = populated[target_index]
        target_ids = sorted(target_ids + [lone_skill])
        refreshed = _refresh_group(target_group, target_ids, gateway, skills)
        populated[target_index] = (refreshed, target_ids)

    return populated


def _merge_target(
    skill_id: str, groups: list[Group], gateway, skills: Mapping[str, Skill]
) -> int:
    """Pick the group a lone skill should join; cosine fallback on failure."""
    skill = skills[skill_id]
    result = gateway.complete(
        ChatCall(
            "category_descent",
            {"mode": "merge_target", "skill": skill.card(), "options": _group_payload(groups)},
        )
    )
    if result.ok and 0 <= result.document["choice"] < len(groups):
        return result.document["choice"]
    skill_vec = gateway.embed(skill.embedding_text())
    scores = [
        cosine(skill_vec, gateway.embed(f"{group.name}: {group.description}")) for group in groups
    ]
    return max(range(len(groups)), key=lambda i: (scores[i], -i))


def _refresh_group(
    group: Group, skill_ids: list[str], gateway, skills: Mapping[str, Skill]
) -> Group:
    document = gateway.complete(
        ChatCall(
            "group_discovery",
            {
                "mode": "refresh",
                "group": {"name": group.name, "description": group.description},
                "skills": _skill_cards(skills, skill_ids),
            },
        )
    ).unwrap()
    refreshed = document["groups"][0]
    return Group(refreshed["name"], refreshed.get("description", ""))


# --------------------------------------------------------------------------
# incremental update
# --------------------------------------------------------------------------


def insert_skill(
    tree: CapabilityTree, skill: Skill, gateway
) -> tuple[CapabilityTree, list[str]]:
    """Descend to the best-matching category, insert a leaf, refresh the path.

    Returns a new tree (the input is left untouched) plus the node-id path
    from root to the insertion parent. Every node on the path except the
    root gets its name and description refreshed bottom-up.
    """
    if skill.id in tree.nodes[tree.root].skill_ids:
        raise DuplicateSkill(skill.id)
    updated = copy.deepcopy(tree)
    node = updated.nodes[updated.root]
    path = [node.node_id]
    while True:
        children = [updated.nodes[child] for child in node.children]
        category_children = [child for child in children if child.kind == "category"]
        if not category_children or any(child.kind == "leaf" for child in children):
            break
        options = [
            {"index": idx, "node_id": child.node_id, "name": child.name, "description": child.description}
            for idx, child in enumerate(category_children)
        ]
        document = gateway.complete(
            ChatCall(
                "category_descent",
                {"mode": "descend", "skill": skill.card(), "options": options},
            )
        ).unwrap()
        choice = document["choice"]
        if not 0 <= choice < len(category_children):
            raise GatewayError("schema_violation", f"descent chose index {choice} of {len(category_children)}")
        node = category_children[choice]
        path.append(node.node_id)

    leaf = CategoryNode(
        node_id=updated.next_node_id(),
        name=skill.name,
        description=skill.description,
        skill_ids={skill.id},
        kind="leaf",
    )
    updated.nodes[leaf.node_id] = leaf
    node.children.append(leaf.node_id)
    for node_id in path:
        updated.nodes[node_id].skill_ids.add(skill.id)

    for node_id in reversed(path):
        if node_id == updated.root:
            continue
        target = updated.nodes[node_id]
        document = gateway.complete(
            ChatCall(
                "group_discovery",
                {
                    "mode": "refresh",
                    "group": {"name": target.name, "description": target.description},
                    "skills": _leaf_cards(updated, node_id),
                },
            )
        ).unwrap()
        refreshed = document["groups"][0]
        target.name = refreshed["name"]
        target.description = refreshed.get("description", target.description)
    return updated, path


def _leaf_cards(tree: CapabilityTree, node_id: str) -> list[dict]:
    """Skill cards for every leaf under a node, read from the leaves themselves."""
    cards = []
    stack = [node_id]
    while stack:
        node = tree.nodes[stack.pop()]
        if node.kind == "leaf":
            (skill_id,) = node.skill_ids
            cards.append({"id": skill_id, "name": node.name, "description": node.description})
        else:
            stack.extend(node.children)
    return sorted(cards, key=lambda card: card["id"])


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def validate_tree(tree: CapabilityTree) -> list[str]:
    """Check every structural law; an empty report means the tree is valid."""
    violations: list[str] = []
    if tree.root not in tree.nodes:
        return [f"root {tree.root} missing from node map"]

    seen: set[str] = set()
    stack = [tree.root]
    while stack:
        node_id = stack.pop()
        if node_id in seen:
            violations.append(f"node {node_id} reachable along two paths (not a tree)")
            continue
        seen.add(node_id)
        node = tree.nodes[node_id]
        for child_id in node.children:
            if child_id not in tree.nodes:
                violations.append(f"node {node_id} references unknown child {child_id}")
            else:
                stack.append(child_id)

    unreachable = tree.nodes.keys() - seen
    if unreachable:
        violations.append(f"unreachable nodes: {sorted(unreachable)}")

    for node_id in sorted(seen):
        node = tree.nodes[node_id]
        if node.kind == "leaf":
            if len(node.skill_ids) != 1 or node.children:
                violations.append(f"leaf {node_id} must hold exactly one skill and no children")
            continue
        if len(node.skill_ids) == 1 and not node.children:
            violations.append(f"node {node_id} holds one skill and no children but is not a leaf")
        if not node.children:
            if node.skill_ids:
                violations.append(f"category {node_id} has skills but no children")
            continue
        union: set[str] = set()
        for child_id in node.children:
            child = tree.nodes.get(child_id)
            if child is None:
                continue
            overlap = union & child.skill_ids
            if overlap:
                violations.append(
                    f"children of {node_id} overlap on {sorted(overlap)}"
                )
            union |= child.skill_ids
            if child.kind == "category" and len(child.skill_ids) == 1:
                violations.append(f"category {child_id} under {node_id} is a singleton group")
        if union != node.skill_ids:
            violations.append(
                f"partition law broken at {node_id}: "
                f"node minus children {sorted(node.skill_ids - union)}, "
                f"children minus node {sorted(union - node.skill_ids)}"
            )

    root_skills = tree.nodes[tree.root].skill_ids
    leaf_ids = tree.leaf_skill_ids()
    if len(leaf_ids) != len(set(leaf_ids)):
        duplicated = sorted({sid for sid in leaf_ids if leaf_ids.count(sid) > 1})
        violations.append(f"skills appear in multiple leaves: {duplicated}")
    if set(leaf_ids) != root_skills:
        violations.append(
            f"leaf coverage mismatch: missing {sorted(root_skills - set(leaf_ids))}, "
            f"extra {sorted(set(leaf_ids) - root_skills)}"
        )
    return violations
