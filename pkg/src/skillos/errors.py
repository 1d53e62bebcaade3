"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SkillOSError(Exception):
    """Base class for all domain errors."""


# --- registry ---------------------------------------------------------------


class MissingManifest(SkillOSError):
    """Skill folder has no SKILL.md."""


class MalformedFrontmatter(SkillOSError):
    """SKILL.md frontmatter is missing or lacks required keys."""


class MalformedMetadata(SkillOSError):
    """meta.json sidecar is unreadable or carries invalid values."""


class DuplicateId(SkillOSError):
    """Skill id already registered in the ecosystem."""


class UnknownSkill(SkillOSError):
    """Referenced skill id does not exist."""


class EmbedderFailure(SkillOSError):
    """Embedding backend failed; message carries the offending context."""


# --- gateway ----------------------------------------------------------------


class GatewayError(SkillOSError):
    """A model call failed. ``kind`` is one of transport/schema_violation/refusal."""

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        super().__init__(message or kind)


class FixtureMiss(GatewayError):
    """Scripted backend in strict mode had no fixture for the call."""

    def __init__(self, key: str):
        super().__init__("fixture_miss", f"no fixture for {key}")
        self.key = key


# --- capability tree --------------------------------------------------------


class CategorizerFailure(SkillOSError):
    """Tree build aborted because a gateway call failed."""


class DegenerateAssignment(SkillOSError):
    """Skill assignment collapsed into one group twice in a row."""


class DuplicateSkill(SkillOSError):
    """Skill is already a leaf of the tree."""


# --- orchestrator -----------------------------------------------------------


class CyclicDependency(SkillOSError):
    """Sub-task dependencies contain a cycle."""

    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("dependency cycle: " + " -> ".join(cycle))


class DanglingDependency(SkillOSError):
    """A sub-task depends on an unknown sub_id."""


class EmptyDecomposition(SkillOSError):
    """Decomposition produced no usable sub-tasks."""


class PlanGenerationError(SkillOSError):
    """No strategy produced a valid plan."""

    def __init__(self, failures: dict[str, str]):
        self.failures = dict(failures)
        super().__init__("all strategies failed: " + "; ".join(f"{k}: {v}" for k, v in failures.items()))


# --- executor ---------------------------------------------------------------


class PredecessorNotSucceeded(SkillOSError):
    """Node prompt requested before all predecessors succeeded."""


class BackendFailure(SkillOSError):
    """Executor backend raised while running a node."""


# --- evaluation -------------------------------------------------------------


class ConverterFailure(SkillOSError):
    """External converter command failed for one file."""


class UnknownSystem(SkillOSError):
    """Outcome references a system outside the declared list."""


class NonConvergence(SkillOSError):
    """Strength fit did not converge; diagnostics attached."""

    def __init__(self, iterations: int, final_delta: float):
        self.iterations = iterations
        self.final_delta = final_delta
        super().__init__(f"no convergence after {iterations} sweeps (delta={final_delta:.3e})")


class CategoryTooSparse(SkillOSError):
    """A task category has no outcomes to fit."""


# --- config / service -------------------------------------------------------


class ConfigError(SkillOSError):
    """Configuration value violates its constraints."""
