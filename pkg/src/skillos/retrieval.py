"""Task-driven skill retrieval: tree traversal, dormant augmentation, pruning.

A task walks the capability tree level by level, with the model selecting
any subset of the presented category branches; leaves reached through
selected branches become candidates. The dormant index contributes its
nearest suggestions, and one pruning call ranks the survivors down to a
compact shortlist. Model-proposed ids outside the candidate set are
discarded, never trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnknownSkill
from .gateway import ChatCall
from .registry import DormantIndex, Registry, suggest_dormant
from .tree import CapabilityTree

DEFAULT_DORMANT_SUGGESTIONS = 5


@dataclass
class TaskRequest:
    task_id: str
    description: str
    embedding: list[float] = field(default_factory=list)
    user_added_ids: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError("task description must be non-empty")


@dataclass
class ShortlistEntry:
    skill_id: str
    rank: int
    rationale: str
    origin: str  # "tree" | "dormant" | "user"


@dataclass
class Shortlist:
    ranked: list[ShortlistEntry] = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [entry.skill_id for entry in self.ranked]

    def to_document(self) -> dict:
        return {
            "ranked": [
                {
                    "skill_id": e.skill_id,
                    "rank": e.rank,
                    "rationale": e.rationale,
                    "origin": e.origin,
                }
                for e in self.ranked
            ]
        }


def traverse_retrieve(tree: CapabilityTree, task: TaskRequest, gateway) -> set[str]:
    """Walk the tree from the root, one selection call per level.

    Leaf children of the current frontier are collected as candidates;
    category children are offered to the selector, and only the selected
    ones carry the walk forward. An empty selection ends the walk.
    """
    if not tree.nodes:
        return set()
    candidates: set[str] = set()
    frontier = [tree.root]
    while frontier:
        leaf_children = []
        category_children = []
        for node_id in frontier:
            for child in tree.children_of(node_id):
                if child.kind == "leaf":
                    leaf_children.append(child)
                else:
                    category_children.append(child)
        for leaf in leaf_children:
            candidates.update(leaf.skill_ids)
        if not category_children:
            break
        options = [
            {
                "node_id": child.node_id,
                "name": child.name,
                "description": child.description,
                "skill_count": len(child.skill_ids),
            }
            for child in category_children
        ]
        document = gateway.complete(
            ChatCall(
                "tree_traversal",
                {"task": task.description, "options": options, "guidance": "inclusive"},
            )
        ).unwrap()
        valid_ids = {child.node_id for child in category_children}
        frontier = [node_id for node_id in document["selected"] if node_id in valid_ids]
    return candidates


def augment_with_dormant(
    candidates: set[str],
    task: TaskRequest,
    index: DormantIndex,
    embedder,
    n: int = DEFAULT_DORMANT_SUGGESTIONS,
) -> tuple[set[str], set[str]]:
    """Union tree candidates with the top dormant suggestions.

    Returns (all candidates, the ids contributed by the dormant index).
    """
    suggestions = suggest_dormant(index, task.description, n, embedder) if len(index) else []
    dormant_ids = {skill_id for skill_id, _ in suggestions}
    return candidates | dormant_ids, dormant_ids - candidates


def prune_rank(
    candidates: set[str],
    task: TaskRequest,
    m: int,
    gateway,
    registry: Registry,
    dormant_ids: set[str] | None = None,
) -> Shortlist:
    """One pruning call keeps, ranks, and truncates the candidates to top-M."""
    if m < 1:
        raise ValueError("M must be >= 1")
    if not candidates:
        return Shortlist()
    dormant_ids = dormant_ids or set()
    cards = [registry.get(skill_id).card() for skill_id in sorted(candidates)]
    document = gateway.complete(
        ChatCall("prune_rank", {"task": task.description, "skills": cards, "top": m})
    ).unwrap()
    kept: list[tuple[int, str, str]] = []
    seen: set[str] = set()
    for record in document["skills"]:
        skill_id = record["skill_id"]
        if skill_id not in candidates or skill_id in seen:
            continue  # fabricated or repeated ids are dropped silently
        seen.add(skill_id)
        if record["keep"]:
            kept.append((record["rank"], skill_id, record.get("rationale", "")))
    kept.sort(key=lambda item: (item[0], item[1]))
    entries = [
        ShortlistEntry(
            skill_id=skill_id,
            rank=position,
            rationale=rationale,
            origin="dormant" if skill_id in dormant_ids else "tree",
        )
        for position, (_, skill_id, rationale) in enumerate(kept[:m], start=1)
    ]
    return Shortlist(ranked=entries)


def finalize_selection(
    shortlist: Shortlist, user_added_ids: set[str], registry: Registry
) -> Shortlist:
    """Append the user's additions; unknown ids are an error, duplicates a no-op."""
    for skill_id in sorted(user_added_ids):
        if skill_id not in registry:
            raise UnknownSkill(skill_id)
    final = Shortlist(ranked=list(shortlist.ranked))
    present = set(final.ids)
    next_rank = len(final.ranked) + 1
    for skill_id in sorted(user_added_ids):
        if skill_id in present:
            continue
        final.ranked.append(
            ShortlistEntry(skill_id=skill_id, rank=next_rank, rationale="added by user", origin="user")
        )
        present.add(skill_id)
        next_rank += 1
    return final


def retrieve(
    tree: CapabilityTree,
    task: TaskRequest,
    gateway,
    registry: Registry,
    index: DormantIndex,
    m: int,
    dormant_n: int = DEFAULT_DORMANT_SUGGESTIONS,
) -> Shortlist:
    """Full pipeline: traverse, augment, prune, then apply user additions."""
    candidates = traverse_retrieve(tree, task, gateway)
    candidates, dormant_ids = augment_with_dormant(candidates, task, index, gateway, n=dormant_n)
    shortlist = prune_rank(candidates, task, m, gateway, registry, dormant_ids=dormant_ids)
    return finalize_selection(shortlist, task.user_added_ids, registry)
