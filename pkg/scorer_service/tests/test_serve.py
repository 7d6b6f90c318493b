import asyncio
import time

import httpx
import pytest

from wicscorer.serve import MAX_BATCH, create_app


@pytest.fixture(scope="module")
def app(trained):
    return create_app(trained["dir"])


def call(app, method, path, payload=None):
    async def run():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://scorer") as client:
            if method == "GET":
                return await client.get(path)
            return await client.post(path, json=payload)

    return asyncio.run(run())


def wire_pairs(fixture, n):
    return [
        {"s1": p["s1"], "s1_start": p["s1_start"], "s1_end": p["s1_end"],
         "s2": p["s2"], "s2_start": p["s2_start"], "s2_end": p["s2_end"],
         "lemma": p["lemma"]}
        for p in fixture["held_pairs"][:n]
    ]


def test_health_reports_model(app):
    resp = call(app, "GET", "/v1/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "model": "tiny"}


def test_scoring_same_pair_twice_is_identical(app, separable_fixture):
    pairs = wire_pairs(separable_fixture, 1)
    first = call(app, "POST", "/v1/score", {"pairs": pairs}).json()["scores"]
    second = call(app, "POST", "/v1/score", {"pairs": pairs}).json()["scores"]
    assert first == second


def test_hundred_pairs_in_order_within_budget(app, separable_fixture):
    pairs = wire_pairs(separable_fixture, 100)
    started = time.monotonic()
    resp = call(app, "POST", "/v1/score", {"pairs": pairs})
    elapsed = time.monotonic() - started
    assert resp.status_code == 200
    scores = resp.json()["scores"]
    assert len(scores) == 100
    assert all(0.0 <= s <= 1.0 for s in scores)
    assert elapsed < 30.0
    # order preservation: singleton scores match the batch positionally
    for probe in (0, 37, 99):
        single = call(app, "POST", "/v1/score", {"pairs": [pairs[probe]]}).json()["scores"][0]
        assert single == pytest.approx(scores[probe], abs=1e-6)


def test_malformed_request_gets_400_error_json(app):
    resp = call(app, "POST", "/v1/score", {"pairs": [{"s1": "le eno polje"}]})
    assert resp.status_code == 400
    body = resp.json()
    assert body["error"] == "request schema violation"
    resp = call(app, "POST", "/v1/score", {"not_pairs": True})
    assert resp.status_code == 200 or resp.status_code == 400  # defaulted empty list is legal
    resp = call(app, "POST", "/v1/score", {"pairs": "not-a-list"})
    assert resp.status_code == 400


def test_bad_span_gets_400(app):
    pair = {"s1": "kratko", "s1_start": 0, "s1_end": 99,
            "s2": "kratko", "s2_start": 0, "s2_end": 6, "lemma": "kratko"}
    resp = call(app, "POST", "/v1/score", {"pairs": [pair]})
    assert resp.status_code == 400
    assert "span" in resp.json()["error"]


def test_overlong_batch_gets_413(app, separable_fixture):
    pair = wire_pairs(separable_fixture, 1)[0]
    resp = call(app, "POST", "/v1/score", {"pairs": [pair] * (MAX_BATCH + 1)})
    assert resp.status_code == 413
    assert resp.json()["max_batch"] == MAX_BATCH


def test_empty_batch_is_fine(app):
    resp = call(app, "POST", "/v1/score", {"pairs": []})
    assert resp.status_code == 200
    assert resp.json()["scores"] == []
