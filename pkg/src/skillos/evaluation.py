"""Pairwise judging pipeline and strength-model ranking.

Artifacts from two systems are converted into judge-consumable form,
compared twice with swapped presentation order, consolidated into
win/tie outcomes, aggregated into a win matrix, and fitted with a
Bradley-Terry model (MM iteration, Laplace-smoothed) whose strengths
are rescaled to [0, 100].
"""

from __future__ import annotations

import csv
import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CategoryTooSparse, ConverterFailure, NonConvergence, UnknownSystem
from .gateway import ChatCall
from .media import media_kind

DEFAULT_TEXT_LIMIT = 20_000
DEFAULT_VIDEO_FRAMES = 8
DEFAULT_IMAGE_LONG_EDGE = 1024

# Kinds whose bytes go to the judge verbatim; everything else needs a converter.
_PASSTHROUGH_KINDS = {"text", "data"}


# --------------------------------------------------------------------------
# artifact conversion
# --------------------------------------------------------------------------


@dataclass
class RenderedArtifact:
    """One file in judge-consumable form: verbatim text or a set of images."""

    source_path: str
    kind: str  # "text" | "image_set"
    text: str = ""
    images: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def unrenderable(self) -> bool:
        return bool(self.metadata.get("unrenderable"))

    def judge_view(self) -> dict:
        view: dict = {"file": Path(self.source_path).name, "kind": self.kind}
        if self.kind == "text":
            view["content"] = self.text
        else:
            view["images"] = [Path(p).name for p in self.images]
        if self.metadata:
            view["metadata"] = self.metadata
        return view


class ConverterRegistry:
    """Maps media kinds to external command templates.

    A template receives ``{input}`` and ``{outdir}`` (plus ``{frames}`` and
    ``{long_edge}``), must write image files into the output directory, and
    may drop a ``metadata.json`` beside them.
    """

    def __init__(
        self,
        commands: Mapping[str, str] | None = None,
        video_frames: int = DEFAULT_VIDEO_FRAMES,
        image_long_edge: int = DEFAULT_IMAGE_LONG_EDGE,
    ):
        self.commands = dict(commands or {})
        self.video_frames = video_frames
        self.image_long_edge = image_long_edge

    def has(self, kind: str) -> bool:
        return kind in self.commands

    def convert(self, path: Path, kind: str) -> tuple[list[str], dict]:
        template = self.commands[kind]
        with tempfile.TemporaryDirectory(prefix="skillos-conv-") as tmp:
            outdir = Path(tmp)
            command = [
                part.format(
                    input=str(path),
                    outdir=str(outdir),
                    frames=self.video_frames,
                    long_edge=self.image_long_edge,
                )
                for part in shlex.split(template)
            ]
            try:
                subprocess.run(command, check=True, capture_output=True, timeout=300)
            except (subprocess.SubprocessError, OSError) as exc:
                raise ConverterFailure(f"{path.name}: {exc}") from exc
            images = sorted(
                str(p) for p in outdir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
            )
            if not images:
                raise ConverterFailure(f"{path.name}: converter produced no images")
            metadata: dict = {}
            meta_file = outdir / "metadata.json"
            if meta_file.is_file():
                try:
                    metadata = json.loads(meta_file.read_text(encoding="utf-8"))
                except ValueError:
                    metadata = {}
            # The temp dir is about to vanish; keep the rendered pages.
            keep = Path(tempfile.mkdtemp(prefix="skillos-rendered-"))
            kept = []
            for image in images:
                target = keep / Path(image).name
                target.write_bytes(Path(image).read_bytes())
                kept.append(str(target))
            return kept, metadata


def convert_artifacts(
    directory: str | Path,
    converters: ConverterRegistry | None = None,
    text_limit: int = DEFAULT_TEXT_LIMIT,
) -> list[RenderedArtifact]:
    """Render every file under a directory for the judge.

    Text-like files pass through verbatim up to ``text_limit`` characters;
    other kinds go through the registered converter command for their media
    kind. Files that cannot be rendered are listed with name and size only.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    converters = converters or ConverterRegistry()
    rendered: list[RenderedArtifact] = []
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        kind = media_kind(path)
        if kind in _PASSTHROUGH_KINDS:
            raw = path.read_text(encoding="utf-8", errors="replace")
            metadata: dict = {}
            if len(raw) > text_limit:
                metadata = {"truncated": True, "original_chars": len(raw)}
                raw = raw[:text_limit]
            rendered.append(
                RenderedArtifact(source_path=str(path), kind="text", text=raw, metadata=metadata)
            )
            continue
        if converters.has(kind):
            try:
                images, metadata = converters.convert(path, kind)
            except ConverterFailure as exc:
                rendered.append(_unrenderable(path, reason=str(exc)))
                continue
            rendered.append(
                RenderedArtifact(
                    source_path=str(path), kind="image_set", images=images, metadata=metadata
                )
            )
        else:
            rendered.append(_unrenderable(path, reason=f"no converter registered for kind {kind!r}"))
    return rendered


def _unrenderable(path: Path, reason: str) -> RenderedArtifact:
    return RenderedArtifact(
        source_path=str(path),
        kind="text",
        text="",
        metadata={
            "unrenderable": True,
            "reason": reason,
            "filename": path.name,
            "size_bytes": path.stat().st_size,
        },
    )


# --------------------------------------------------------------------------
# pairwise judging
# --------------------------------------------------------------------------


@dataclass
class Verdict:
    value: str  # "prefer_first" | "prefer_second" | "error"
    rationale: str = ""
    error_kind: str | None = None


@dataclass(frozen=True)
class Outcome:
    task_id: str
    system_i: str
    system_j: str
    result: str  # "i_wins" | "j_wins" | "tie"

    def __post_init__(self) -> None:
        if self.system_i == self.system_j:
            raise ValueError("an outcome must compare two distinct systems")


def judge_pair(
    rendered_a: Sequence[RenderedArtifact],
    rendered_b: Sequence[RenderedArtifact],
    task: str,
    gateway,
) -> Verdict:
    """One judging call: task first, then side A, then side B, fixed order."""
    views_a = [r.judge_view() for r in rendered_a]
    views_b = [r.judge_view() for r in rendered_b]
    if not views_a and not views_b:
        return Verdict("error", error_kind="no_artifacts")
    result = gateway.complete(
        ChatCall("judge", {"task": task, "first": views_a, "second": views_b})
    )
    if not result.ok:
        return Verdict("error", rationale=result.error_message, error_kind=result.error_kind)
    preference = result.document["preference"]
    value = "prefer_first" if preference == "first" else "prefer_second"
    return Verdict(value, rationale=result.document.get("rationale", ""))


def debiased_compare(
    outputs_i: Sequence[RenderedArtifact],
    outputs_j: Sequence[RenderedArtifact],
    task: str,
    gateway,
    task_id: str,
    system_i: str,
    system_j: str,
) -> Outcome:
    """Judge in both presentation orders and consolidate into one outcome.

    Agreement adopts the shared preference; a single errored ordering defers
    to the valid one; disagreement, or two errors, records a tie.
    """
    forward = judge_pair(outputs_i, outputs_j, task, gateway)
    reverse = judge_pair(outputs_j, outputs_i, task, gateway)
    pick_forward = _preferred_system(forward, system_i, system_j)
    pick_reverse = _preferred_system(reverse, system_j, system_i)

    if pick_forward and pick_reverse:
        winner = pick_forward if pick_forward == pick_reverse else None
    else:
        winner = pick_forward or pick_reverse

    if winner == system_i:
        result = "i_wins"
    elif winner == system_j:
        result = "j_wins"
    else:
        result = "tie"
    return Outcome(task_id=task_id, system_i=system_i, system_j=system_j, result=result)


def _preferred_system(verdict: Verdict, first: str, second: str) -> str | None:
    if verdict.value == "prefer_first":
        return first
    if verdict.value == "prefer_second":
        return second
    return None


# --------------------------------------------------------------------------
# aggregation and strength fit
# --------------------------------------------------------------------------


@dataclass
class WinMatrix:
    systems: list[str]
    w: np.ndarray

    def index(self, system: str) -> int:
        return self.systems.index(system)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + self.systems)
            for name, row in zip(self.systems, self.w):
                writer.writerow([name] + [f"{value:g}" for value in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "WinMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        systems = rows[0][1:]
        w = np.array([[float(cell) for cell in row[1:]] for row in rows[1:]], dtype=float)
        if w.shape != (len(systems), len(systems)):
            raise ValueError("win matrix CSV is not square")
        return cls(systems=systems, w=w)


def aggregate(outcomes: Iterable[Outcome], systems: Sequence[str]) -> WinMatrix:
    """Count pairwise preferences; ties credit 0.5 to both directions."""
    systems = list(systems)
    lookup = {name: idx for idx, name in enumerate(systems)}
    w = np.zeros((len(systems), len(systems)), dtype=float)
    for outcome in outcomes:
        if outcome.system_i not in lookup or outcome.system_j not in lookup:
            raise UnknownSystem(f"{outcome.system_i} vs {outcome.system_j}")
        i, j = lookup[outcome.system_i], lookup[outcome.system_j]
        if outcome.result == "i_wins":
            w[i, j] += 1.0
        elif outcome.result == "j_wins":
            w[j, i] += 1.0
        else:
            w[i, j] += 0.5
            w[j, i] += 0.5
    return WinMatrix(systems=systems, w=w)


@dataclass
class BTFit:
    beta: np.ndarray
    iterations: int
    final_delta: float
    log_likelihoods: list[float]


def smoothed_log_likelihood(beta: np.ndarray, w_smoothed: np.ndarray) -> float:
    """Log-likelihood of the preference model over the smoothed counts."""
    n = len(beta)
    diff = beta[:, None] - beta[None, :]
    log_p = -np.logaddexp(0.0, -diff)
    mask = ~np.eye(n, dtype=bool)
    return float(np.sum(w_smoothed[mask] * log_p[mask]))


def fit_bradley_terry(
    w: np.ndarray,
    alpha: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> BTFit:
    """Fit latent strengths by the MM iteration on the smoothed win matrix.

    Every off-diagonal cell gains ``alpha`` virtual wins, which makes the
    comparison graph strongly connected and the MLE finite and unique up to
    an additive constant; strengths are returned centered to zero mean.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if n < 2:
        raise ValueError("need at least two systems")
    if w.shape != (n, n):
        raise ValueError("win matrix must be square")
    ws = w + alpha * (1.0 - np.eye(n))
    wins = ws.sum(axis=1)
    n_ij = ws + ws.T

    pi = np.ones(n)
    beta = np.zeros(n)
    log_likelihoods: list[float] = []
    final_delta = float("inf")
    for iteration in range(1, max_iter + 1):
        denom = n_ij / (pi[:, None] + pi[None, :])
        np.fill_diagonal(denom, 0.0)
        pi_new = wins / denom.sum(axis=1)
        pi_new /= np.exp(np.mean(np.log(pi_new)))  # renormalize each sweep
        beta_new = np.log(pi_new)
        beta_new -= beta_new.mean()
        final_delta = float(np.max(np.abs(beta_new - beta)))
        pi, beta = pi_new, beta_new
        log_likelihoods.append(smoothed_log_likelihood(beta, ws))
        if final_delta < tol:
            return BTFit(
                beta=beta,
                iterations=iteration,
                final_delta=final_delta,
                log_likelihoods=log_likelihoods,
            )
    raise NonConvergence(max_iter, final_delta)


def rescale(beta: np.ndarray) -> np.ndarray:
    """Linear map of strengths onto [0, 100]; a flat field maps to all 50."""
    beta = np.asarray(beta, dtype=float)
    if beta.size == 0:
        raise ValueError("beta must be non-empty")
    spread = beta.max() - beta.min()
    if spread < 1e-12:
        return np.full(beta.shape, 50.0)
    return (beta - beta.min()) / spread * 100.0


@dataclass
class BTScores:
    systems: list[str]
    beta: list[float]
    score: list[float]
    iterations: int
    final_delta: float

    def report(self) -> dict:
        return {
            "systems": self.systems,
            "beta": self.beta,
            "score": self.score,
            "iterations": self.iterations,
        }


def rank_systems(win: WinMatrix, alpha: float = 1.0, tol: float = 1e-10) -> BTScores:
    fit = fit_bradley_terry(win.w, alpha=alpha, tol=tol)
    scores = rescale(fit.beta)
    return BTScores(
        systems=list(win.systems),
        beta=[float(b) for b in fit.beta],
        score=[float(s) for s in scores],
        iterations=fit.iterations,
        final_delta=fit.final_delta,
    )


def per_category_scores(
    outcomes: Iterable[Outcome],
    category_of_task: Mapping[str, str],
    alpha: float = 1.0,
) -> dict[str, BTScores]:
    """Independent aggregate + fit + rescale per task category."""
    outcomes = list(outcomes)
    by_category: dict[str, list[Outcome]] = {cat: [] for cat in set(category_of_task.values())}
    for outcome in outcomes:
        if outcome.task_id not in category_of_task:
            raise ValueError(f"task {outcome.task_id} has no category label")
        by_category[category_of_task[outcome.task_id]].append(outcome)
    results: dict[str, BTScores] = {}
    for category in sorted(by_category):
        members = by_category[category]
        if not members:
            raise CategoryTooSparse(category)
        systems = sorted({o.system_i for o in members} | {o.system_j for o in members})
        results[category] = rank_systems(aggregate(members, systems), alpha=alpha)
    return results


# --------------------------------------------------------------------------
# outcome log persistence
# --------------------------------------------------------------------------


def append_outcome(path: str | Path, outcome: Outcome) -> None:
    record = {
        "task_id": outcome.task_id,
        "system_i": outcome.system_i,
        "system_j": outcome.system_j,
        "result": outcome.result,
    }
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_outcomes(path: str | Path) -> list[Outcome]:
    outcomes = []
    path = Path(path)
    if not path.is_file():
        return outcomes
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            outcomes.append(Outcome(**json.loads(line)))
    return outcomes
