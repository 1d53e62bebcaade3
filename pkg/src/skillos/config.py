"""Configuration model binding all modules together."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .evaluation import (
    DEFAULT_IMAGE_LONG_EDGE,
    DEFAULT_TEXT_LIMIT,
    DEFAULT_VIDEO_FRAMES,
    ConverterRegistry,
)
from .executor import DEFAULT_RECIPE_THRESHOLD, CommandExecutorBackend, ScriptedExecutorBackend
from .gateway import HttpGateway, ScriptedGateway
from .scripted import default_fallbacks
from .tree import TreeConfig, derived_capacity

ENV_PREFIX = "SKILLOS_"


@dataclass
class Config:
    b: int = 7
    c: int | None = None  # derived as floor(1.5 * B) when unset
    k: int = 10_000
    m: int = 8
    dormant_n: int = 5
    recipe_threshold: float = DEFAULT_RECIPE_THRESHOLD
    gateway_backend: str = "scripted"  # "scripted" | "http"
    fixtures_path: str | None = None
    strict_fixtures: bool = False
    models: dict[str, str] = field(default_factory=dict)  # role_tag -> model name
    default_model: str = "default"
    embed_model: str = "default-embed"
    schema_retries: int = 2
    converters: dict[str, str] = field(default_factory=dict)  # media kind -> command template
    video_frames: int = DEFAULT_VIDEO_FRAMES
    image_long_edge: int = DEFAULT_IMAGE_LONG_EDGE
    text_limit: int = DEFAULT_TEXT_LIMIT
    workspace: str = "workspace"
    layer_concurrency: int | None = None  # None = unbounded within a layer
    gateway_concurrency: int = 8  # in-flight cap for the live backend
    executor_command: list[str] | None = None  # live agent adapter; scripted when unset

    def __post_init__(self) -> None:
        if self.c is None:
            self.c = derived_capacity(self.b)
        if self.b < 4:
            raise ConfigError("B must be >= 4")
        if self.c < 2:
            raise ConfigError("C must be >= 2")
        if self.k < 1:
            raise ConfigError("K must be >= 1")
        if self.m < 1:
            raise ConfigError("M must be >= 1")
        if not 0 < self.recipe_threshold <= 1:
            raise ConfigError("recipe threshold must be in (0, 1]")
        if self.gateway_backend not in ("scripted", "http"):
            raise ConfigError(f"unknown gateway backend {self.gateway_backend!r}")
        if self.layer_concurrency is not None and self.layer_concurrency < 1:
            raise ConfigError("layer concurrency cap must be >= 1")
        if self.gateway_concurrency < 1:
            raise ConfigError("gateway concurrency cap must be >= 1")

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_sources(
        cls, file_path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
    ) -> "Config":
        """File values, then environment, then explicit overrides."""
        values: dict[str, Any] = {}
        if file_path:
            values.update(json.loads(Path(file_path).read_text(encoding="utf-8")))
        values.update(_env_overrides())
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416
        unknown = values.keys() - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    # -- wiring ------------------------------------------------------------------

    def tree_config(self) -> TreeConfig:
        assert self.c is not None
        return TreeConfig(b=self.b, c=self.c)

    def build_gateway(self):
        if self.gateway_backend == "scripted":
            fixtures = {}
            if self.fixtures_path:
                fixtures = json.loads(Path(self.fixtures_path).read_text(encoding="utf-8"))
            return ScriptedGateway(
                fixtures=fixtures,
                fallbacks={} if self.strict_fixtures else default_fallbacks(),
                strict=self.strict_fixtures,
            )
        base_url = os.environ.get(f"{ENV_PREFIX}LLM_BASE_URL")
        if not base_url:
            raise ConfigError("http gateway requires SKILLOS_LLM_BASE_URL")
        return HttpGateway(
            base_url=base_url,
            api_key=os.environ.get(f"{ENV_PREFIX}LLM_API_KEY", ""),
            models=self.models,
            default_model=self.default_model,
            embed_model=self.embed_model,
            schema_retries=self.schema_retries,
            max_concurrency=self.gateway_concurrency,
        )

    def build_executor_backend(self):
        if self.executor_command:
            return CommandExecutorBackend(self.executor_command)
        return ScriptedExecutorBackend()

    def build_converters(self) -> ConverterRegistry:
        return ConverterRegistry(
            commands=self.converters,
            video_frames=self.video_frames,
            image_long_edge=self.image_long_edge,
        )

    def workspace_path(self) -> Path:
        return Path(self.workspace)


_ENV_KEYS: dict[str, Any] = {
    "B": ("b", int),
    "C": ("c", int),
    "K": ("k", int),
    "M": ("m", int),
    "DORMANT_N": ("dormant_n", int),
    "RECIPE_THRESHOLD": ("recipe_threshold", float),
    "GATEWAY": ("gateway_backend", str),
    "FIXTURES": ("fixtures_path", str),
    "WORKSPACE": ("workspace", str),
    "LAYER_CONCURRENCY": ("layer_concurrency", int),
}


def _env_overrides() -> dict[str, Any]:
    values: dict[str, Any] = {}
    for env_suffix, (field_name, cast) in _ENV_KEYS.items():
        raw = os.environ.get(ENV_PREFIX + env_suffix)
        if raw is not None:
            try:
                values[field_name] = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {ENV_PREFIX}{env_suffix}: {raw!r}") from exc
    return values
