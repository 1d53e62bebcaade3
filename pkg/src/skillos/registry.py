"""Skill ingestion, the active set, and the dormant suggestion index.

A skill is a folder holding a SKILL.md manifest (YAML frontmatter with
``name`` and ``description``) plus optional scripts and resources. The
registry holds the full ecosystem, tracks the user-pinned subset, selects
the active set by install-count ranking, and serves embedding suggestions
over whatever fell outside it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Protocol

import yaml

from .errors import (
    DuplicateId,
    EmbedderFailure,
    MalformedFrontmatter,
    MalformedMetadata,
    MissingManifest,
    UnknownSkill,
)
from .gateway import cosine


class Embedder(Protocol):
    def embed(self, text: str) -> list[float]: ...


@dataclass(frozen=True)
class Skill:
    """One ecosystem entry."""

    id: str
    name: str
    description: str
    root_path: str
    install_count: int = 0
    source: str = "marketplace"  # "marketplace" | "user"

    def card(self) -> dict:
        """Compact form used in model payloads (never includes embeddings)."""
        return {"id": self.id, "name": self.name, "description": self.description}

    def embedding_text(self) -> str:
        return f"{self.name}: {self.description}"


@dataclass
class Ecosystem:
    """The full skill set S plus the user-selected subset."""

    skills: dict[str, Skill] = field(default_factory=dict)
    user_ids: set[str] = field(default_factory=set)


def slugify(raw: str) -> str:
    """Directory name -> skill id: lowercase, non-alphanumerics collapse to '-'."""
    slug = re.sub(r"[^a-z0-9]+", "-", raw.lower()).strip("-")
    if not slug:
        raise MalformedFrontmatter(f"cannot derive an id from {raw!r}")
    return slug


_FRONTMATTER_RE = re.compile(r"\A---\s*\n(.*?)\n---\s*(?:\n|\Z)", re.DOTALL)


def load_skill(directory: str | Path) -> Skill:
    """Read one skill folder into a Skill record."""
    directory = Path(directory)
    manifest = directory / "SKILL.md"
    if not manifest.is_file():
        raise MissingManifest(f"{directory} has no SKILL.md")
    match = _FRONTMATTER_RE.match(manifest.read_text(encoding="utf-8"))
    if not match:
        raise MalformedFrontmatter(f"{manifest} has no frontmatter block")
    try:
        meta = yaml.safe_load(match.group(1)) or {}
    except yaml.YAMLError as exc:
        raise MalformedFrontmatter(f"{manifest}: {exc}") from exc
    name = meta.get("name")
    description = meta.get("description")
    if not name or not description:
        raise MalformedFrontmatter(f"{manifest} must declare name and description")

    install_count = 0
    sidecar = directory / "meta.json"
    if sidecar.is_file():
        try:
            raw = json.loads(sidecar.read_text(encoding="utf-8")).get("install_count", 0)
        except ValueError as exc:
            raise MalformedMetadata(f"{sidecar}: {exc}") from exc
        if not isinstance(raw, int) or raw < 0:
            raise MalformedMetadata(f"{sidecar}: install_count must be a non-negative integer")
        install_count = raw

    return Skill(
        id=slugify(directory.name),
        name=str(name),
        description=str(description),
        root_path=str(directory),
        install_count=install_count,
    )


def select_active_set(eco: Ecosystem, k: int) -> list[str]:
    """TopK by install count (ties by id) plus every user-pinned skill."""
    if k < 1:
        raise ValueError("K must be >= 1")
    queue = sorted(eco.skills.values(), key=lambda s: (-s.install_count, s.id))
    active = [s.id for s in queue[:k]]
    seen = set(active)
    for skill_id in sorted(eco.user_ids):
        if skill_id not in seen:
            active.append(skill_id)
            seen.add(skill_id)
    return active


@dataclass
class DormantIndex:
    """Immutable vector index over the skills outside the active set."""

    entries: list[tuple[str, list[float]]]
    dimension: int

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> set[str]:
        return {skill_id for skill_id, _ in self.entries}


def build_dormant_index(eco: Ecosystem, active: Iterable[str], embedder: Embedder) -> DormantIndex:
    active_set = set(active)
    unknown = active_set - eco.skills.keys()
    if unknown:
        raise UnknownSkill(f"active set references unknown ids: {sorted(unknown)}")
    entries: list[tuple[str, list[float]]] = []
    dimension = 0
    for skill_id in sorted(eco.skills.keys() - active_set):
        skill = eco.skills[skill_id]
        try:
            vector = embedder.embed(skill.embedding_text())
        except Exception as exc:  # noqa: BLE001 - context added, then re-raised
            raise EmbedderFailure(f"embedding failed for skill {skill_id}: {exc}") from exc
        dimension = len(vector)
        entries.append((skill_id, vector))
    return DormantIndex(entries=entries, dimension=dimension)


def suggest_dormant(
    index: DormantIndex, query: str, n: int, embedder: Embedder
) -> list[tuple[str, float]]:
    """Top-n dormant skills by cosine similarity, ties broken by id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not index.entries:
        return []
    query_vec = embedder.embed(query)
    scored = [(skill_id, cosine(query_vec, vector)) for skill_id, vector in index.entries]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:n]


class Registry:
    """Mutable ecosystem wrapper with promotion events and persistence."""

    def __init__(self, eco: Ecosystem | None = None):
        self.eco = eco or Ecosystem()
        self._tree_update_listeners: list[Callable[[Skill], None]] = []

    # -- mutation (exclusive access expected) --------------------------------

    def register(self, skill: Skill) -> None:
        if skill.id in self.eco.skills:
            raise DuplicateId(skill.id)
        self.eco.skills[skill.id] = skill

    def register_folder(self, directory: str | Path) -> Skill:
        skill = load_skill(directory)
        self.register(skill)
        return skill

    def promote_skill(self, skill_id: str) -> Ecosystem:
        """Pin a skill into the user set; fires a tree-update event once."""
        if skill_id not in self.eco.skills:
            raise UnknownSkill(skill_id)
        if skill_id in self.eco.user_ids:
            return self.eco  # idempotent: no duplicate event
        self.eco.user_ids.add(skill_id)
        skill = self.eco.skills[skill_id]
        if skill.source != "user":
            self.eco.skills[skill_id] = replace(skill, source="user")
        for listener in self._tree_update_listeners:
            listener(self.eco.skills[skill_id])
        return self.eco

    def on_tree_update(self, listener: Callable[[Skill], None]) -> None:
        self._tree_update_listeners.append(listener)

    # -- reads ----------------------------------------------------------------

    def get(self, skill_id: str) -> Skill:
        try:
            return self.eco.skills[skill_id]
        except KeyError:
            raise UnknownSkill(skill_id) from None

    def __contains__(self, skill_id: str) -> bool:
        return skill_id in self.eco.skills

    def __len__(self) -> int:
        return len(self.eco.skills)

    # -- persistence ----------------------------------------------------------

    def to_snapshot(self) -> dict:
        return {
            "skills": [
                {
                    "id": s.id,
                    "name": s.name,
                    "description": s.description,
                    "root_path": s.root_path,
                    "install_count": s.install_count,
                    "source": s.source,
                }
                for s in sorted(self.eco.skills.values(), key=lambda s: s.id)
            ],
            "user_ids": sorted(self.eco.user_ids),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_snapshot(), indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def from_snapshot(cls, snapshot: dict) -> "Registry":
        registry = cls()
        for record in snapshot.get("skills", []):
            registry.register(Skill(**record))
        for skill_id in snapshot.get("user_ids", []):
            if skill_id not in registry.eco.skills:
                raise UnknownSkill(f"user_ids references unknown id {skill_id}")
            registry.eco.user_ids.add(skill_id)
        return registry

    @classmethod
    def load(cls, path: str | Path) -> "Registry":
        return cls.from_snapshot(json.loads(Path(path).read_text(encoding="utf-8")))
