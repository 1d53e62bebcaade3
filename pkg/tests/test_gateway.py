"""Gateway: scripted replay, schema enforcement, embeddings, HTTP retries."""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import httpx
import pytest

from skillos.errors import FixtureMiss
from skillos.gateway import (
    ChatCall,
    HashingEmbedder,
    HttpGateway,
    ScriptedGateway,
    cosine,
    payload_hash,
)


class TestChatCall:
    def test_rejects_unknown_role(self):
        with pytest.raises(ValueError):
            ChatCall("mystery_role", {"x": 1})

    def test_rejects_empty_payload(self):
        with pytest.raises(ValueError):
            ChatCall("judge", {})

    def test_payload_hash_is_order_insensitive(self):
        assert payload_hash({"a": 1, "b": 2}) == payload_hash({"b": 2, "a": 1})


class TestScriptedGateway:
    def test_fixture_replay_verbatim(self):
        call = ChatCall("judge", {"task": "t", "first": [], "second": [{"file": "a", "kind": "text"}]})
        document = {"preference": "first", "rationale": "fixture"}
        gateway = ScriptedGateway(fixtures={call.fixture_key: document})
        result = gateway.complete(call)
        assert result.ok
        assert result.document == document

    def test_strict_mode_raises_on_miss(self):
        gateway = ScriptedGateway(strict=True)
        with pytest.raises(FixtureMiss):
            gateway.complete(ChatCall("judge", {"task": "t", "first": [], "second": []}))

    def test_repeated_calls_are_identical(self):
        gateway = ScriptedGateway(
            fallbacks={"judge": lambda payload: {"preference": "first", "rationale": "r"}}
        )
        call = ChatCall("judge", {"task": "t", "first": [], "second": []})
        first = gateway.complete(call)
        second = gateway.complete(call)
        assert first.document == second.document

    def test_fixture_violating_schema_is_an_error(self):
        call = ChatCall("judge", {"task": "t", "first": [], "second": []})
        gateway = ScriptedGateway(fixtures={call.fixture_key: {"preference": "maybe"}})
        result = gateway.complete(call)
        assert not result.ok
        assert result.error_kind == "schema_violation"

    def test_fallback_precedence_below_fixtures(self):
        call = ChatCall("judge", {"task": "t", "first": [], "second": []})
        gateway = ScriptedGateway(
            fixtures={call.fixture_key: {"preference": "second"}},
            fallbacks={"judge": {"preference": "first"}},
        )
        assert gateway.complete(call).document == {"preference": "second"}


class TestHashingEmbedder:
    def test_determinism(self):
        embedder = HashingEmbedder()
        assert embedder.embed("alpha beta gamma") == embedder.embed("alpha beta gamma")

    def test_unit_norm_over_random_strings(self):
        rng = random.Random(11)
        words = "alpha beta gamma delta epsilon zeta eta theta".split()
        embedder = HashingEmbedder()
        for _ in range(100):
            text = " ".join(rng.choices(words, k=rng.randint(1, 12)))
            vector = embedder.embed(text)
            assert abs(sum(x * x for x in vector) - 1.0) < 1e-6

    def test_bag_of_words_is_order_invariant(self):
        embedder = HashingEmbedder()
        assert cosine(embedder.embed("alpha beta"), embedder.embed("beta alpha")) == pytest.approx(1.0)

    def test_dimension(self):
        assert len(HashingEmbedder(dim=64).embed("hello")) == 64


class _ScriptedHTTPHandler(BaseHTTPRequestHandler):
    """Plays a canned sequence of responses, one per request."""

    script: list[tuple[int, dict]] = []
    calls: list[dict] = []

    def do_POST(self):  # noqa: N802 - http.server naming
        length = int(self.headers["Content-Length"])
        type(self).calls.append(json.loads(self.rfile.read(length)))
        status, body = self.script[min(len(self.calls) - 1, len(self.script) - 1)]
        payload = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # silence test output
        pass


@pytest.fixture
def stub_server():
    def start(script: list[tuple[int, dict]]):
        handler = type("Handler", (_ScriptedHTTPHandler,), {"script": script, "calls": []})
        server = HTTPServer(("127.0.0.1", 0), handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        return server, handler

    servers = []

    def factory(script):
        server, handler = start(script)
        servers.append(server)
        return f"http://127.0.0.1:{server.server_port}", handler

    yield factory
    for server in servers:
        server.shutdown()


def _completion(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


class TestHttpGateway:
    def test_valid_response_passes_schema(self, stub_server):
        base, _ = stub_server([(200, _completion('{"preference": "first", "rationale": "ok"}'))])
        gateway = HttpGateway(base_url=base)
        result = gateway.complete(ChatCall("judge", {"task": "t", "first": [], "second": []}))
        assert result.ok
        assert result.document["preference"] == "first"

    def test_malformed_twice_with_two_retries_errors(self, stub_server):
        base, handler = stub_server(
            [
                (200, _completion("not json at all")),
                (200, _completion('{"preference": "maybe"}')),
                (200, _completion('{"still": "wrong"}')),
            ]
        )
        gateway = HttpGateway(base_url=base, schema_retries=2)
        result = gateway.complete(ChatCall("judge", {"task": "t", "first": [], "second": []}))
        assert not result.ok
        assert result.error_kind == "schema_violation"
        assert len(handler.calls) == 3  # initial + 2 retries

    def test_retry_recovers_after_one_bad_document(self, stub_server):
        base, handler = stub_server(
            [
                (200, _completion('{"preference": "maybe"}')),
                (200, _completion('{"preference": "second"}')),
            ]
        )
        gateway = HttpGateway(base_url=base, schema_retries=2)
        result = gateway.complete(ChatCall("judge", {"task": "t", "first": [], "second": []}))
        assert result.ok
        assert result.document["preference"] == "second"
        assert len(handler.calls) == 2

    def test_http_error_is_transport(self, stub_server):
        base, _ = stub_server([(500, {"error": "down"})])
        gateway = HttpGateway(base_url=base)
        result = gateway.complete(ChatCall("judge", {"task": "t", "first": [], "second": []}))
        assert result.error_kind == "transport"

    def test_refusal_detected(self, stub_server):
        base, _ = stub_server(
            [(200, {"choices": [{"message": {"role": "assistant", "refusal": "no"}}]})]
        )
        gateway = HttpGateway(base_url=base)
        result = gateway.complete(ChatCall("judge", {"task": "t", "first": [], "second": []}))
        assert result.error_kind == "refusal"

    def test_embedding_normalized(self, stub_server):
        base, _ = stub_server([(200, {"data": [{"embedding": [3.0, 4.0]}]})])
        gateway = HttpGateway(base_url=base)
        vector = gateway.embed("hello")
        assert vector == pytest.approx([0.6, 0.8])

    def test_concurrent_call_cap(self):
        import threading
        import time

        in_flight = []
        peak = []
        lock = threading.Lock()

        class SlowTransport:
            def post(self, url, json=None):
                with lock:
                    in_flight.append(1)
                    peak.append(len(in_flight))
                time.sleep(0.05)
                with lock:
                    in_flight.pop()
                response = httpx.Response(
                    200,
                    json={
                        "choices": [
                            {"message": {"role": "assistant",
                                         "content": '{"preference": "first"}'}}
                        ]
                    },
                )
                return response

        gateway = HttpGateway(base_url="http://x", max_concurrency=2, client=SlowTransport())
        call = ChatCall("judge", {"task": "t", "first": [], "second": []})
        results = []
        threads = [
            threading.Thread(target=lambda: results.append(gateway.complete(call)))
            for _ in range(6)
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert len(results) == 6 and all(result.ok for result in results)
        assert len(peak) == 6  # every request actually reached the transport
        assert max(peak) <= 2
