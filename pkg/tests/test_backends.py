import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from atomic_reasoner import router
from atomic_reasoner.backends import (
    CacheBackend,
    CacheMode,
    ChatMessage,
    CompletionRequest,
    CompletionResult,
    HttpBackend,
    HttpConfig,
    ResultSource,
    ScriptedBackend,
    cache_key,
)
from atomic_reasoner.errors import (
    AuthError,
    BackendTimeout,
    MalformedResponse,
    RateLimited,
    ScriptExhausted,
)


def make_request(text="hello", tag="solve", temperature=0.5):
    return CompletionRequest(
        messages=[ChatMessage("system", "sys"), ChatMessage("user", text)],
        temperature=temperature,
        tag=tag,
    )


def ok_payload(content="pong", prompt_tokens=3, completion_tokens=2):
    return {
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


class StubHandler(BaseHTTPRequestHandler):
    """Serves a scripted sequence of behaviors shared via the server object."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        self.server.requests.append(json.loads(body))
        behavior = (
            self.server.script.pop(0) if self.server.script else ("ok", ok_payload())
        )
        kind, payload = behavior
        if kind == "status":
            self.send_response(payload)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(b'{"error": "scripted"}')
        elif kind == "malformed":
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(payload.encode())
        else:
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(json.dumps(payload).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    server.script = []
    server.requests = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    thread.join(timeout=5)


def make_http_backend(server, **overrides):
    sleeps = []
    config = HttpConfig(
        base_url=f"http://127.0.0.1:{server.server_address[1]}/v1",
        model="stub-model",
        **overrides,
    )
    backend = HttpBackend(config, sleep=sleeps.append, rng=random.Random(0))
    return backend, sleeps


class TestScriptedBackend:
    def test_fifo_queue(self):
        backend = ScriptedBackend(["one", "two"])
        assert backend.complete(make_request()).text == "one"
        assert backend.complete(make_request()).text == "two"
        with pytest.raises(ScriptExhausted):
            backend.complete(make_request())

    def test_tag_keyed_queues_and_infinite_string(self):
        backend = ScriptedBackend({"solve": ["a"], "check": "always"})
        assert backend.complete(make_request(tag="check")).text == "always"
        assert backend.complete(make_request(tag="check")).text == "always"
        assert backend.complete(make_request(tag="solve")).text == "a"
        with pytest.raises(ScriptExhausted):
            backend.complete(make_request(tag="solve"))

    def test_callable_default(self):
        backend = ScriptedBackend({}, default=lambda r: r.messages[-1].content.upper())
        assert backend.complete(make_request("echo me")).text == "ECHO ME"

    def test_records_calls(self):
        backend = ScriptedBackend({"solve": ["x"]})
        backend.complete(make_request("traced"))
        assert backend.calls[0].messages[-1].content == "traced"

    def test_result_source(self):
        backend = ScriptedBackend(["x"])
        assert backend.complete(make_request()).source is ResultSource.SCRIPT


class TestRequestValidation:
    def test_empty_messages_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(messages=[], temperature=0.5, tag="solve")

    def test_temperature_bounds(self):
        with pytest.raises(ValueError):
            make_request(temperature=2.5)

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError):
            make_request(tag="divination")


class TestHttpBackend:
    def test_ok_parses_text_and_usage(self, stub_server):
        stub_server.script = [("ok", ok_payload("answer text", 11, 7))]
        backend, _ = make_http_backend(stub_server)
        result = backend.complete(make_request())
        assert result.text == "answer text"
        assert result.prompt_tokens == 11 and result.completion_tokens == 7
        assert result.source is ResultSource.NETWORK
        sent = stub_server.requests[0]
        assert sent["model"] == "stub-model"
        assert sent["messages"][0] == {"role": "system", "content": "sys"}

    def test_retries_429_then_500_then_succeeds(self, stub_server):
        stub_server.script = [("status", 429), ("status", 500), ("ok", ok_payload())]
        backend, sleeps = make_http_backend(stub_server)
        assert backend.complete(make_request()).text == "pong"
        assert len(stub_server.requests) == 3
        assert len(sleeps) == 2  # one backoff per failed attempt

    def test_backoff_is_exponential_with_jitter(self, stub_server):
        stub_server.script = [("status", 500)] * 3 + [("ok", ok_payload())]
        backend, sleeps = make_http_backend(stub_server)
        backend.complete(make_request())
        # base 1s, factor 2, jitter in [0.5x, 1.5x)
        for attempt, delay in enumerate(sleeps):
            assert 0.5 * 2**attempt <= delay < 1.5 * 2**attempt

    def test_exhausted_retries_raise_rate_limited(self, stub_server):
        stub_server.script = [("status", 429)] * 10
        backend, _ = make_http_backend(stub_server, max_retries=2)
        with pytest.raises(RateLimited):
            backend.complete(make_request())
        assert len(stub_server.requests) == 3  # initial + 2 retries

    def test_auth_error_is_immediate(self, stub_server):
        stub_server.script = [("status", 401)]
        backend, _ = make_http_backend(stub_server)
        with pytest.raises(AuthError):
            backend.complete(make_request())
        assert len(stub_server.requests) == 1  # never retried

    def test_malformed_body_raises(self, stub_server):
        stub_server.script = [("malformed", '{"choices": []}')]
        backend, _ = make_http_backend(stub_server)
        with pytest.raises(MalformedResponse):
            backend.complete(make_request())

    def test_timeout_retried_then_raised(self, stub_server, monkeypatch):
        import requests as requests_lib

        backend, sleeps = make_http_backend(stub_server, max_retries=1)

        def always_timeout(*args, **kwargs):
            raise requests_lib.Timeout("scripted timeout")

        monkeypatch.setattr(backend._session, "post", always_timeout)
        with pytest.raises(BackendTimeout):
            backend.complete(make_request())
        assert len(sleeps) == 1

    def test_api_key_header_from_env(self, stub_server, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-unit-test")
        stub_server.script = [("ok", ok_payload())]
        backend, _ = make_http_backend(stub_server)

        captured = {}
        original = backend._session.post

        def spy(url, **kwargs):
            captured.update(kwargs["headers"])
            return original(url, **kwargs)

        backend._session.post = spy
        backend.complete(make_request())
        assert captured["Authorization"] == "Bearer sk-unit-test"


class TestCacheBackend:
    def test_key_is_stable_and_order_sensitive(self):
        a = cache_key(make_request("one"), "m")
        assert a == cache_key(make_request("one"), "m")
        assert a != cache_key(make_request("two"), "m")
        assert a != cache_key(make_request("one"), "other-model")

    def test_record_then_replay_identical(self, tmp_path):
        inner = ScriptedBackend({"solve": ["recorded answer"]})
        recorder = CacheBackend(inner, CacheMode.RECORD, tmp_path)
        first = recorder.complete(make_request("q"))

        replayer = CacheBackend(None, CacheMode.REPLAY, tmp_path)
        second = replayer.complete(make_request("q"))
        assert second.text == first.text
        assert second.prompt_tokens == first.prompt_tokens
        assert second.source is ResultSource.CACHE

    def test_strict_replay_miss_raises(self, tmp_path):
        replayer = CacheBackend(None, CacheMode.REPLAY, tmp_path)
        with pytest.raises(MalformedResponse, match="cache miss"):
            replayer.complete(make_request("never recorded"))

    def test_nonstrict_replay_falls_through(self, tmp_path):
        inner = ScriptedBackend({"solve": ["live"]})
        replayer = CacheBackend(inner, CacheMode.REPLAY, tmp_path, strict=False)
        assert replayer.complete(make_request("q")).text == "live"

    def test_record_replay_full_session_byte_identical(self, tmp_path):
        """A whole session recorded, then replayed with no inner backend."""
        from atomic_reasoner import cases, metrics, sop

        fixture = cases.load_case("case1")
        registry = sop.builtin_registry()
        recorder = CacheBackend(fixture.backend(), CacheMode.RECORD, tmp_path)
        tree1, final1 = router.run_session(
            fixture.task.to_problem(), backends=recorder, sop_registry=registry
        )

        replayer = CacheBackend(None, CacheMode.REPLAY, tmp_path)
        tree2, final2 = router.run_session(
            fixture.task.to_problem(), backends=replayer, sop_registry=registry
        )
        assert final2.text == final1.text
        assert metrics.serialize_trace(tree2) == metrics.serialize_trace(tree1)
