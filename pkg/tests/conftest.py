"""Shared fixtures: structured skill corpora and scripted gateways.

Corpus skills carry a leading topic token in their name (drives grouping)
and a top-level category phrase in their description (drives root
assignment), so the deterministic responders categorize them predictably.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from skillos.gateway import ScriptedGateway
from skillos.registry import Ecosystem, Registry, Skill, slugify
from skillos.scripted import default_fallbacks

# topic -> (root category phrase, noun used in names, description detail)
TOPIC_SPECS: dict[str, tuple[str, str, str]] = {
    "video": ("content creation", "renderer", "renders animated clips with smooth timeline transitions"),
    "slides": ("content creation", "deckmaker", "lays out presentation decks with consistent styling"),
    "pdf": ("content creation", "typesetter", "typesets polished reports with figures"),
    "chart": ("data processing", "plotter", "draws statistical charts from tabular input"),
    "dataset": ("data processing", "wrangler", "cleans tables, joins sources, computes summaries"),
    "scraper": ("automation", "collector", "gathers pages on a schedule into tidy records"),
    "workflow": ("automation", "runner", "chains repetitive operations into scheduled jobs"),
    "code": ("software development", "refactorer", "rewrites modules, fixes bugs, tightens interfaces"),
    "testing": ("software development", "verifier", "generates regression suites with coverage goals"),
    "legal": ("domain-specific", "paralegal", "drafts contracts plus compliance checklists"),
    "medical": ("domain-specific", "triager", "summarizes clinical notes into structured intake forms"),
    "audio": ("content creation", "mixer", "records voiceovers, balances podcast tracks"),
}

TOPICS = list(TOPIC_SPECS)


def make_skill(topic: str, serial: int, install_count: int) -> Skill:
    category, noun, detail = TOPIC_SPECS[topic]
    name = f"{topic} {noun}-{serial:02d}"
    return Skill(
        id=slugify(name),
        name=name,
        description=f"A {category} skill for {topic} work: {detail}.",
        root_path=f"/skills/{slugify(name)}",
        install_count=install_count,
    )


def make_corpus(count: int) -> dict[str, Skill]:
    """Deterministic corpus: topics round-robin, install counts descending."""
    skills: dict[str, Skill] = {}
    for index in range(count):
        topic = TOPICS[index % len(TOPICS)]
        serial = index // len(TOPICS)
        skill = make_skill(topic, serial, install_count=1000 - index)
        skills[skill.id] = skill
    return skills


def registry_for(corpus: dict[str, Skill]) -> Registry:
    registry = Registry(Ecosystem(skills=dict(corpus)))
    return registry


def write_skill_folder(
    root: Path, name: str, description: str, install_count: int | None = None
) -> Path:
    directory = root / slugify(name)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "SKILL.md").write_text(
        f"---\nname: {json.dumps(name)}\ndescription: {json.dumps(description)}\n---\n\n"
        f"# {name}\n\nInstructions here.\n",
        encoding="utf-8",
    )
    if install_count is not None:
        (directory / "meta.json").write_text(f'{{"install_count": {install_count}}}', encoding="utf-8")
    return directory


@pytest.fixture
def scripted_gateway() -> ScriptedGateway:
    return ScriptedGateway(fallbacks=default_fallbacks())


@pytest.fixture
def corpus12() -> dict[str, Skill]:
    return make_corpus(12)


@pytest.fixture
def corpus60() -> dict[str, Skill]:
    return make_corpus(60)
