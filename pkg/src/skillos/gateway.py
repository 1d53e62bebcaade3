"""Model-call gateway: structured chat completions and text embeddings.

Every model interaction in the system goes through one of the backends
defined here. Responses are schema-constrained JSON documents, never free
text, so downstream parsers are total. The scripted backend replays
fixtures (or delegates to declared per-role fallbacks) and is a pure
function of (role_tag, payload hash); the HTTP backend talks to a
chat-completion endpoint and retries schema violations.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import httpx
import jsonschema

from .errors import EmbedderFailure, FixtureMiss, GatewayError

ROLE_TAGS = (
    "group_discovery",
    "skill_assignment",
    "category_descent",
    "tree_traversal",
    "prune_rank",
    "decompose",
    "node_execute",
    "judge",
)

# One response schema per role; role_tag -> schema_id is a bijection.
RESPONSE_SCHEMAS: dict[str, dict[str, Any]] = {
    "group_discovery": {
        "type": "object",
        "required": ["groups"],
        "properties": {
            "groups": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["name", "description"],
                    "properties": {
                        "name": {"type": "string", "minLength": 1},
                        "description": {"type": "string"},
                    },
                },
            }
        },
    },
    "skill_assignment": {
        "type": "object",
        "required": ["assignments"],
        "properties": {
            "assignments": {
                "type": "object",
                "additionalProperties": {"type": "integer"},
            }
        },
    },
    "category_descent": {
        "type": "object",
        "required": ["choice"],
        "properties": {"choice": {"type": "integer", "minimum": 0}},
    },
    "tree_traversal": {
        "type": "object",
        "required": ["selected"],
        "properties": {
            "selected": {"type": "array", "items": {"type": "string"}}
        },
    },
    "prune_rank": {
        "type": "object",
        "required": ["skills"],
        "properties": {
            "skills": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["skill_id", "keep", "rank"],
                    "properties": {
                        "skill_id": {"type": "string"},
                        "keep": {"type": "boolean"},
                        "rank": {"type": "integer", "minimum": 1},
                        "rationale": {"type": "string"},
                    },
                },
            }
        },
    },
    "decompose": {
        "type": "object",
        "required": ["sub_tasks"],
        "properties": {
            "sub_tasks": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["sub_id", "objective", "skill_id"],
                    "properties": {
                        "sub_id": {"type": "string", "minLength": 1},
                        "objective": {"type": "string"},
                        "skill_id": {"type": "string"},
                        "depends_on": {"type": "array", "items": {"type": "string"}},
                        "expected_outputs": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "required": ["pattern"],
                                "properties": {
                                    "pattern": {"type": "string"},
                                    "purpose": {"type": "string"},
                                },
                            },
                        },
                    },
                },
            }
        },
    },
    "node_execute": {
        "type": "object",
        "required": ["report"],
        "properties": {"report": {"type": "string"}},
    },
    "judge": {
        "type": "object",
        "required": ["preference"],
        "properties": {
            "preference": {"enum": ["first", "second"]},
            "rationale": {"type": "string"},
        },
    },
}


def canonical_json(document: Any) -> str:
    """Serialize with stable key order so hashing is reproducible."""
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def payload_hash(payload: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ChatCall:
    """One structured model request."""

    role_tag: str
    payload: Mapping[str, Any]

    def __post_init__(self) -> None:
        if self.role_tag not in ROLE_TAGS:
            raise ValueError(f"unknown role_tag {self.role_tag!r}")
        if not self.payload:
            raise ValueError("payload must be non-empty")

    @property
    def schema_id(self) -> str:
        return self.role_tag

    @property
    def fixture_key(self) -> str:
        return f"{self.role_tag}:{payload_hash(self.payload)}"


@dataclass
class ChatResult:
    status: str  # "ok" | "error"
    document: Any = None
    error_kind: str | None = None
    error_message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def unwrap(self) -> Any:
        """Return the document or raise the carried gateway error."""
        if self.ok:
            return self.document
        raise GatewayError(self.error_kind or "unknown", self.error_message)


def validate_document(role_tag: str, document: Any) -> str | None:
    """Return an error string when the document breaks the role's schema."""
    try:
        jsonschema.validate(document, RESPONSE_SCHEMAS[role_tag])
    except jsonschema.ValidationError as exc:
        return exc.message
    return None


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashingEmbedder:
    """Deterministic bag-of-words embedder for offline use.

    Tokens hash into ``dim`` buckets; the count vector is L2-normalized.
    Word order does not matter, which keeps it a pure set-of-tokens signal.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        if not text:
            raise EmbedderFailure("cannot embed empty text")
        counts = [0.0] * self.dim
        for token in _TOKEN_RE.findall(text.lower()):
            bucket = int.from_bytes(hashlib.sha256(token.encode()).digest()[:8], "big") % self.dim
            counts[bucket] += 1.0
        norm = math.sqrt(sum(c * c for c in counts))
        if norm == 0.0:
            # No alphanumeric tokens at all: fall back to a fixed unit vector.
            counts[0] = 1.0
            return counts
        return [c / norm for c in counts]


def cosine(a: list[float], b: list[float]) -> float:
    return sum(x * y for x, y in zip(a, b))


Responder = Callable[[Mapping[str, Any]], Any]


class ScriptedGateway:
    """Deterministic replay backend.

    Lookup order per call: exact fixture keyed by ``role_tag:payload_hash``,
    then the declared fallback for the role (a static document or a callable
    on the payload). In strict mode a miss raises instead of falling back.
    """

    def __init__(
        self,
        fixtures: Mapping[str, Any] | None = None,
        fallbacks: Mapping[str, Any | Responder] | None = None,
        strict: bool = False,
        embed_dim: int = 256,
    ):
        self.fixtures = dict(fixtures or {})
        self.fallbacks = dict(fallbacks or {})
        self.strict = strict
        self._embedder = HashingEmbedder(embed_dim)

    @classmethod
    def from_fixture_file(cls, path, **kwargs) -> "ScriptedGateway":
        with open(path, encoding="utf-8") as fh:
            return cls(fixtures=json.load(fh), **kwargs)

    def complete(self, call: ChatCall) -> ChatResult:
        key = call.fixture_key
        if key in self.fixtures:
            document = self.fixtures[key]
        elif call.role_tag in self.fallbacks:
            fallback = self.fallbacks[call.role_tag]
            try:
                document = fallback(call.payload) if callable(fallback) else fallback
            except GatewayError as exc:
                return ChatResult("error", error_kind=exc.kind, error_message=str(exc))
        elif self.strict:
            raise FixtureMiss(key)
        else:
            return ChatResult("error", error_kind="transport", error_message=f"no fixture or fallback for {key}")
        problem = validate_document(call.role_tag, document)
        if problem is not None:
            return ChatResult("error", error_kind="schema_violation", error_message=problem)
        return ChatResult("ok", document=document)

    def embed(self, text: str) -> list[float]:
        return self._embedder.embed(text)


class HttpGateway:
    """Live backend over an OpenAI-style chat-completion endpoint.

    The base URL and API key come from the environment
    (``SKILLOS_LLM_BASE_URL``, ``SKILLOS_LLM_API_KEY``); the model used for
    each role comes from config. Schema violations are retried up to
    ``schema_retries`` times before surfacing as errors. At most
    ``max_concurrency`` requests are in flight at once.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        models: Mapping[str, str] | None = None,
        default_model: str = "default",
        embed_model: str = "default-embed",
        schema_retries: int = 2,
        timeout: float = 120.0,
        max_concurrency: int = 8,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.models = dict(models or {})
        self.default_model = default_model
        self.embed_model = embed_model
        self.schema_retries = schema_retries
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)
        self._slots = threading.BoundedSemaphore(max(max_concurrency, 1))

    def model_for(self, role_tag: str) -> str:
        return self.models.get(role_tag, self.default_model)

    def complete(self, call: ChatCall) -> ChatResult:
        prompt = (
            "Respond with a single JSON object conforming to this schema:\n"
            + canonical_json(RESPONSE_SCHEMAS[call.role_tag])
            + "\n\nRequest:\n"
            + canonical_json(call.payload)
        )
        body = {
            "model": self.model_for(call.role_tag),
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        last_error = ""
        for _ in range(self.schema_retries + 1):
            try:
                with self._slots:
                    response = self._client.post(f"{self.base_url}/chat/completions", json=body)
            except httpx.HTTPError as exc:
                return ChatResult("error", error_kind="transport", error_message=str(exc))
            if response.status_code != 200:
                return ChatResult(
                    "error", error_kind="transport", error_message=f"HTTP {response.status_code}"
                )
            try:
                message = response.json()["choices"][0]["message"]
            except (KeyError, IndexError, ValueError) as exc:
                last_error = f"malformed completion envelope: {exc}"
                continue
            if message.get("refusal"):
                return ChatResult("error", error_kind="refusal", error_message=str(message["refusal"]))
            document, parse_error = _extract_json(message.get("content") or "")
            if parse_error:
                last_error = parse_error
                continue
            problem = validate_document(call.role_tag, document)
            if problem is None:
                return ChatResult("ok", document=document)
            last_error = problem
        return ChatResult("error", error_kind="schema_violation", error_message=last_error)

    def embed(self, text: str) -> list[float]:
        if not text:
            raise EmbedderFailure("cannot embed empty text")
        try:
            with self._slots:
                response = self._client.post(
                    f"{self.base_url}/embeddings", json={"model": self.embed_model, "input": text}
                )
            response.raise_for_status()
            vector = response.json()["data"][0]["embedding"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise GatewayError("transport", f"embedding call failed: {exc}") from exc
        norm = math.sqrt(sum(x * x for x in vector))
        if norm == 0.0:
            raise EmbedderFailure("backend returned a zero vector")
        return [x / norm for x in vector]


def _extract_json(content: str) -> tuple[Any, str | None]:
    """Pull the first JSON object out of a completion, tolerating fences."""
    text = content.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-z]*\n?|\n?```$", "", text)
    try:
        return json.loads(text), None
    except ValueError:
        match = re.search(r"\{.*\}", text, re.DOTALL)
        if match:
            try:
                return json.loads(match.group()), None
            except ValueError as exc:
                return None, f"unparseable JSON: {exc}"
        return None, "no JSON object in completion"
