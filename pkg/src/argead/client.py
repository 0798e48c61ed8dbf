"""Client for the AD generation endpoint, plus a local mock of that endpoint.

Wire contract: ``POST /v1/generate`` with a JSON request body; a 200 reply
carries ``{clip_id, ad_text, model_id, latency_ms}``. 429 and 5xx replies,
timeouts, connection failures and unparsable 200 bodies are retried with
exponential backoff; any other status fails immediately.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Iterable, Mapping

import httpx

from argead.store import ActionLexicon, ClipContext

log = logging.getLogger(__name__)

ENV_URL = "ARGEAD_ENDPOINT_URL"
ENV_TOKEN = "ARGEAD_ENDPOINT_TOKEN"
GENERATE_PATH = "/v1/generate"
FALLBACK_AD = "Players move across the pitch."


class EndpointError(RuntimeError):
    def __init__(self, message: str, clip_id: str | None = None):
        super().__init__(message)
        self.clip_id = clip_id


class EndpointTimeout(EndpointError):
    pass


class EndpointUnavailable(EndpointError):
    pass


class MalformedResponse(EndpointError):
    pass


class EndpointStatusError(EndpointError):
    def __init__(self, message: str, status: int, clip_id: str | None = None):
        super().__init__(message, clip_id)
        self.status = status


class MockServerError(RuntimeError):
    pass


# ---------------------------------------------------------------- wire types


@dataclass(frozen=True)
class GenerationRequest:
    clip_id: str
    prompt: str
    context: Mapping[str, Any] = field(default_factory=dict)
    video_uri: str | None = None
    max_tokens: int = 128
    temperature: float = 0.0
    frames: int | None = None

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def for_clip(cls, context: ClipContext, prompt: str, **kwargs) -> "GenerationRequest":
        ctx = {
            "commentary": context.commentary,
            "players": list(context.players),
            "actions": [{"label": a.label, "t_s": a.t_s} for a in context.actions],
            "previous_ad": context.previous_ad,
        }
        return cls(context.clip_id, prompt, ctx, **kwargs)

    def to_wire(self) -> dict[str, Any]:
        body = {
            "clip_id": self.clip_id,
            "video_uri": self.video_uri,
            "prompt": self.prompt,
            "context": dict(self.context),
            "decode": {"max_tokens": self.max_tokens, "temperature": self.temperature},
        }
        if self.frames is not None:
            body["frames"] = self.frames
        return body

    @classmethod
    def from_wire(cls, body: Any) -> "GenerationRequest":
        if not isinstance(body, dict) or not isinstance(body.get("clip_id"), str) or not isinstance(body.get("prompt"), str):
            raise ValueError("request needs string clip_id and prompt")
        decode = body.get("decode") or {}
        context = body.get("context") or {}
        if not isinstance(decode, dict) or not isinstance(context, dict):
            raise ValueError("decode and context must be objects")
        return cls(
            clip_id=body["clip_id"],
            prompt=body["prompt"],
            context=context,
            video_uri=body.get("video_uri"),
            max_tokens=int(decode.get("max_tokens", 128)),
            temperature=float(decode.get("temperature", 0.0)),
            frames=body.get("frames"),
        )


@dataclass(frozen=True)
class GenerationResponse:
    clip_id: str
    ad_text: str
    model_id: str
    latency_ms: int

    def to_wire(self) -> dict[str, Any]:
        return {"clip_id": self.clip_id, "ad_text": self.ad_text, "model_id": self.model_id, "latency_ms": self.latency_ms}

    @classmethod
    def from_wire(cls, body: Any, expected_clip_id: str) -> "GenerationResponse":
        if not isinstance(body, dict):
            raise MalformedResponse("response body is not a JSON object", expected_clip_id)
        clip_id, text, model_id, latency = (body.get(k) for k in ("clip_id", "ad_text", "model_id", "latency_ms"))
        if not isinstance(text, str) or not isinstance(model_id, str):
            raise MalformedResponse("response needs string ad_text and model_id", expected_clip_id)
        if isinstance(latency, bool) or not isinstance(latency, int):
            raise MalformedResponse("latency_ms must be an integer", expected_clip_id)
        if clip_id != expected_clip_id:
            raise MalformedResponse(f"response clip_id {clip_id!r} does not match request", expected_clip_id)
        return cls(clip_id, text, model_id, latency)


# ---------------------------------------------------------------- client


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    token: str | None = None
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_base_s: float = 0.5
    backoff_max_s: float = 8.0
    concurrency: int = 8

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.concurrency < 1:
            raise ValueError("concurrency must be at least 1")

    @classmethod
    def from_env(cls, url: str | None = None, token: str | None = None, **kwargs) -> "EndpointConfig":
        url = url or os.environ.get(ENV_URL)
        if not url:
            raise ValueError(f"no endpoint URL given and {ENV_URL} is not set")
        return cls(url=url, token=token or os.environ.get(ENV_TOKEN), **kwargs)

    @property
    def generate_url(self) -> str:
        base = self.url.rstrip("/")
        return base if base.endswith(GENERATE_PATH) else base + GENERATE_PATH

    def backoff(self, attempt: int) -> float:
        return min(self.backoff_max_s, self.backoff_base_s * 2 ** (attempt - 1))


@dataclass
class BatchResult:
    responses: dict[str, GenerationResponse] = field(default_factory=dict)
    failures: dict[str, EndpointError] = field(default_factory=dict)


class InferenceClient:
    """Blocking client; ``generate_many`` fans out over a bounded thread pool."""

    def __init__(
        self,
        config: EndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        headers = {"Authorization": f"Bearer {config.token}"} if config.token else {}
        self._http = httpx.Client(timeout=config.timeout_s, headers=headers, transport=transport)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "InferenceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _attempt(self, request: GenerationRequest) -> GenerationResponse:
        cid = request.clip_id
        try:
            resp = self._http.post(self.config.generate_url, json=request.to_wire())
        except httpx.TimeoutException as exc:
            raise EndpointTimeout(f"timeout: {exc}", cid) from exc
        except httpx.TransportError as exc:
            raise EndpointUnavailable(f"endpoint unreachable: {exc}", cid) from exc
        if resp.status_code != 200:
            raise EndpointStatusError(f"status {resp.status_code}: {resp.text[:200]}", resp.status_code, cid)
        try:
            body = resp.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise MalformedResponse("response body is not JSON", cid) from None
        return GenerationResponse.from_wire(body, cid)

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        """Send one request, retrying transient failures up to ``max_attempts`` times."""
        last: EndpointError | None = None
        for attempt in range(1, self.config.max_attempts + 1):
            try:
                return self._attempt(request)
            except EndpointStatusError as exc:
                if exc.status != 429 and exc.status < 500:
                    raise
                last = exc
            except EndpointError as exc:
                last = exc
            if attempt < self.config.max_attempts:
                delay = self.config.backoff(attempt)
                log.debug("clip %s attempt %d failed (%s); retrying in %.2fs", request.clip_id, attempt, last, delay)
                self._sleep(delay)
        assert last is not None
        raise last

    def generate_many(self, requests: Iterable[GenerationRequest]) -> BatchResult:
        """Run requests with at most ``concurrency`` in flight; failures are collected per clip."""
        requests = list(requests)
        ids = [r.clip_id for r in requests]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate clip_id in batch")
        result = BatchResult()

        def run(req: GenerationRequest):
            try:
                return req.clip_id, self.generate(req), None
            except EndpointError as exc:
                return req.clip_id, None, exc

        with ThreadPoolExecutor(max_workers=self.config.concurrency) as pool:
            for clip_id, resp, err in pool.map(run, requests):
                if err is None:
                    result.responses[clip_id] = resp
                else:
                    result.failures[clip_id] = err
        return result


def generate_ad(request: GenerationRequest, endpoint_config: EndpointConfig) -> GenerationResponse:
    with InferenceClient(endpoint_config) as client:
        return client.generate(request)


# ---------------------------------------------------------------- mock endpoint


def third_person(lemma: str) -> str:
    if lemma.endswith(("s", "sh", "ch", "x", "z", "o")):
        return lemma + "es"
    if lemma.endswith("y") and len(lemma) > 1 and lemma[-2] not in "aeiou":
        return lemma[:-1] + "ies"
    return lemma + "s"


def echo_ad(context: Mapping[str, Any], lexicon: ActionLexicon) -> str:
    """Deterministic AD built from the request context: ``"<player> <verb>s."``."""
    players = [p for p in context.get("players") or [] if isinstance(p, str) and p]
    lemma = None
    for action in context.get("actions") or []:
        label = action.get("label") if isinstance(action, dict) else None
        if label in lexicon and lexicon.lemmas_for(label):
            lemma = lexicon.lemmas_for(label)[0]
            break
    if not players and lemma is None:
        return FALLBACK_AD
    subject = players[0] if players else "A player"
    return f"{subject} {third_person(lemma or 'move')}."


class MockServer:
    """In-process HTTP server speaking the generation wire contract.

    Fixture mode (``fixtures`` given) returns canned text per clip and 404
    for unknown clips; echo mode synthesizes text from the request context.
    ``faults`` is consumed one entry per request: an int is returned as the
    HTTP status, ``"malformed"`` sends an unparsable 200 body, and
    ``"wrong-clip"`` answers with a different clip_id.
    """

    def __init__(
        self,
        fixtures: Mapping[str, str] | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        lexicon: ActionLexicon | None = None,
        faults: Iterable[int | str] = (),
        token: str | None = None,
    ):
        self.fixtures = dict(fixtures) if fixtures is not None else None
        self.mode = "fixture" if fixtures is not None else "echo"
        self.lexicon = lexicon or ActionLexicon.default()
        self.token = token
        self._faults = list(faults)
        self._lock = threading.Lock()
        self._log: list[dict[str, Any]] = []
        try:
            self._server = ThreadingHTTPServer((host, port), self._handler_class())
        except OSError as exc:
            raise MockServerError(f"cannot bind {host}:{port}: {exc}") from exc
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def requests(self) -> list[dict[str, Any]]:
        with self._lock:
            return list(self._log)

    def start(self) -> "MockServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, name="argead-mock", daemon=True
        )
        self._thread.start()
        return self

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockServer":
        if self._thread is None:
            self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def _next_fault(self) -> int | str | None:
        with self._lock:
            return self._faults.pop(0) if self._faults else None

    def _respond(self, body: Any) -> tuple[int, Any]:
        try:
            req = GenerationRequest.from_wire(body)
        except (ValueError, TypeError) as exc:
            return 422, {"error": str(exc)}
        with self._lock:
            self._log.append(req.to_wire())
        fault = self._next_fault()
        if isinstance(fault, int):
            return fault, {"error": "injected fault"}
        if fault == "malformed":
            return 200, b"{not json"
        if self.mode == "fixture":
            if req.clip_id not in self.fixtures:
                return 404, {"error": f"no fixture for clip {req.clip_id!r}"}
            text, model = self.fixtures[req.clip_id], "mock-fixture"
        else:
            text, model = echo_ad(req.context, self.lexicon), "mock-echo"
        clip_id = req.clip_id + "-other" if fault == "wrong-clip" else req.clip_id
        return 200, GenerationResponse(clip_id, text, model, 0).to_wire()

    def _handler_class(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, format, *args):  # noqa: A002
                log.debug("mock: " + format, *args)

            def _send(self, status: int, payload: Any) -> None:
                data = payload if isinstance(payload, bytes) else json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):  # noqa: N802
                if self.path.rstrip("/") != GENERATE_PATH:
                    return self._send(404, {"error": "not found"})
                if server.token and self.headers.get("Authorization") != f"Bearer {server.token}":
                    return self._send(401, {"error": "unauthorized"})
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError):
                    return self._send(400, {"error": "invalid JSON"})
                self._send(*server._respond(body))

        return Handler


def run_mock_server(fixtures: Mapping[str, str] | None = None, port: int = 0, **kwargs) -> MockServer:
    """Start a :class:`MockServer` on a background thread and return it."""
    return MockServer(fixtures, port=port, **kwargs).start()
