import json

import httpx
import pytest

from argead.client import (
    FALLBACK_AD,
    EndpointConfig,
    EndpointStatusError,
    EndpointTimeout,
    EndpointUnavailable,
    GenerationRequest,
    InferenceClient,
    MalformedResponse,
    MockServer,
    echo_ad,
    generate_ad,
    run_mock_server,
    third_person,
)
from argead.store import ActionLexicon, Action, ClipContext

LEX = ActionLexicon.default()


def req(clip_id="c1", **ctx):
    return GenerationRequest(clip_id, "Describe.", ctx)


def fast(url, **kw):
    return EndpointConfig(url, backoff_base_s=0.0, backoff_max_s=0.0, **kw)


def test_fixture_mode():
    with MockServer({"c1": "Rooney shoots."}) as srv:
        assert generate_ad(req(), fast(srv.url)).ad_text == "Rooney shoots."
        with pytest.raises(EndpointStatusError) as err:
            generate_ad(req("c2"), fast(srv.url))
        assert err.value.status == 404


def test_echo_mode():
    ctx = {"players": ["Wayne Rooney"], "actions": [{"label": "Goal", "t_s": 1.0}]}
    with MockServer() as srv:
        r = generate_ad(req(**ctx), fast(srv.url))
        assert r.ad_text == "Wayne Rooney scores." and r.model_id == "mock-echo"
        assert generate_ad(req(), fast(srv.url)).ad_text == FALLBACK_AD


def test_echo_ad_rules():
    assert echo_ad({"players": ["Mata"]}, LEX) == "Mata moves."
    assert echo_ad({"actions": [{"label": "Save"}]}, LEX) == "A player saves."
    assert third_person("catch") == "catches" and third_person("parry") == "parries"


def test_request_wire_round_trip():
    ctx = ClipContext("c9", "Chance!", ("A B",), (Action("Goal", 3.0),), None)
    r = GenerationRequest.for_clip(ctx, "Describe.", video_uri="file:///c9.mp4", frames=8)
    assert GenerationRequest.from_wire(json.loads(json.dumps(r.to_wire()))) == r


def test_retry_then_success():
    with MockServer({"c1": "ok"}, faults=[503, 429, "malformed"]) as srv:
        r = generate_ad(req(), fast(srv.url, max_attempts=4))
        assert r.ad_text == "ok" and len(srv.requests) == 4


def test_malformed_exhausts_retries():
    with MockServer({"c1": "ok"}, faults=["malformed"] * 3) as srv:
        with pytest.raises(MalformedResponse):
            generate_ad(req(), fast(srv.url, max_attempts=3))
        assert len(srv.requests) == 3


def test_wrong_clip_is_malformed():
    with MockServer({"c1": "ok"}, faults=["wrong-clip"]) as srv:
        with pytest.raises(MalformedResponse):
            generate_ad(req(), fast(srv.url, max_attempts=1))


def test_client_error_not_retried():
    with MockServer({"c1": "ok"}, faults=[400]) as srv:
        with pytest.raises(EndpointStatusError):
            generate_ad(req(), fast(srv.url, max_attempts=3))
        assert len(srv.requests) == 1


def test_auth_token():
    with MockServer({"c1": "ok"}, token="s3cret") as srv:
        with pytest.raises(EndpointStatusError) as err:
            generate_ad(req(), fast(srv.url))
        assert err.value.status == 401
        assert generate_ad(req(), fast(srv.url, token="s3cret")).ad_text == "ok"


def test_unreachable():
    with pytest.raises(EndpointUnavailable):
        generate_ad(req(), fast("http://127.0.0.1:9", max_attempts=2))


def test_backoff_schedule_with_mock_transport():
    calls, sleeps = [], []

    def handler(request):
        calls.append(json.loads(request.content))
        if len(calls) < 3:
            return httpx.Response(500)
        return httpx.Response(200, json={"clip_id": "c1", "ad_text": "x", "model_id": "m", "latency_ms": 1})

    cfg = EndpointConfig("http://model", max_attempts=3, backoff_base_s=0.5)
    with InferenceClient(cfg, transport=httpx.MockTransport(handler), sleep=sleeps.append) as client:
        assert client.generate(req()).ad_text == "x"
    assert sleeps == [0.5, 1.0]
    assert calls[0]["decode"] == {"max_tokens": 128, "temperature": 0.0}


def test_timeout_is_retried():
    attempts = []

    def handler(request):
        attempts.append(1)
        raise httpx.ReadTimeout("slow", request=request)

    with InferenceClient(EndpointConfig("http://m", max_attempts=2), httpx.MockTransport(handler), sleep=lambda s: None) as c:
        with pytest.raises(EndpointTimeout):
            c.generate(req())
    assert len(attempts) == 2


def test_hundred_concurrent_requests():
    fixtures = {f"c{i:03d}": f"Player {i} shoots." for i in range(100)}
    with run_mock_server(fixtures) as srv:
        with InferenceClient(fast(srv.url, concurrency=8)) as client:
            batch = client.generate_many(GenerationRequest(cid, "Describe.") for cid in fixtures)
    assert not batch.failures
    assert {cid: r.ad_text for cid, r in batch.responses.items()} == fixtures


def test_batch_records_per_clip_failures():
    with MockServer({"c1": "ok"}) as srv:
        with InferenceClient(fast(srv.url)) as client:
            batch = client.generate_many([req("c1"), req("c2")])
    assert set(batch.responses) == {"c1"} and set(batch.failures) == {"c2"}


def test_env_config(monkeypatch):
    monkeypatch.setenv("ARGEAD_ENDPOINT_URL", "http://x:1")
    monkeypatch.setenv("ARGEAD_ENDPOINT_TOKEN", "t")
    cfg = EndpointConfig.from_env()
    assert cfg.generate_url == "http://x:1/v1/generate" and cfg.token == "t"
    monkeypatch.delenv("ARGEAD_ENDPOINT_URL")
    with pytest.raises(ValueError):
        EndpointConfig.from_env()


def test_mock_rejects_bad_request():
    with MockServer() as srv:
        r = httpx.post(srv.url + "/v1/generate", json={"prompt": 3})
        assert r.status_code == 422
