"""HTTP provider wire contracts (against a stub session) and mocks."""

import numpy as np
import pytest
import requests

from clinevents.errors import ProviderError, ProviderTimeout
from clinevents.providers import (
    CachedEmbeddingProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    HttpLlmProvider,
    ReplayLlmProvider,
    embed_batch,
)


class FakeResponse:
    def __init__(self, status_code=200, payload=None):
        self.status_code = status_code
        self._payload = payload or {}

    def json(self):
        return self._payload


class StubSession:
    def __init__(self, *responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append({"url": url, "json": json, "headers": headers,
                              "timeout": timeout})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class TestHttpEmbeddingProvider:
    def make(self, *responses, **kwargs):
        session = StubSession(*responses)
        provider = HttpEmbeddingProvider(
            endpoint="http://emb.local/embed", dimension=3,
            token="sekrit", session=session, **kwargs,
        )
        return provider, session

    def test_request_and_response_shape(self):
        provider, session = self.make(
            FakeResponse(payload={"vectors": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]})
        )
        vectors = provider.embed_batch(["a", "b"])
        assert session.requests[0]["json"] == {"texts": ["a", "b"]}
        assert session.requests[0]["headers"]["Authorization"] == "Bearer sekrit"
        assert np.array_equal(vectors[0], [1.0, 0.0, 0.0])

    def test_server_error_is_transient(self):
        provider, _ = self.make(FakeResponse(status_code=503))
        with pytest.raises(ProviderError) as err:
            provider.embed_batch(["x"])
        assert err.value.transient

    def test_client_error_is_not_transient(self):
        provider, _ = self.make(FakeResponse(status_code=401))
        with pytest.raises(ProviderError) as err:
            provider.embed_batch(["x"])
        assert not err.value.transient

    def test_timeout_maps_to_provider_timeout(self):
        provider, _ = self.make(requests.Timeout("too slow"))
        with pytest.raises(ProviderTimeout):
            provider.embed_batch(["x"])

    def test_missing_endpoint_rejected(self, monkeypatch):
        monkeypatch.delenv("CLINEVENTS_EMBEDDING_ENDPOINT", raising=False)
        with pytest.raises(ProviderError):
            HttpEmbeddingProvider(endpoint="", dimension=3)


class TestHttpLlmProvider:
    def test_chat_payload_and_extraction(self):
        session = StubSession(
            FakeResponse(payload={"choices": [{"message": {"content": "fever | -72"}}]})
        )
        provider = HttpLlmProvider(
            endpoint="http://llm.local/v1/chat", model="annotator-8b",
            api_key="k", temperature=0.0, max_tokens=4096, session=session,
        )
        out = provider.complete("sys", "user text")
        assert out == "fever | -72"
        sent = session.requests[0]["json"]
        assert sent["model"] == "annotator-8b"
        assert sent["temperature"] == 0.0
        assert sent["max_tokens"] == 4096
        assert sent["messages"] == [
            {"role": "system", "content": "sys"},
            {"role": "user", "content": "user text"},
        ]

    def test_rate_limit_is_transient(self):
        session = StubSession(FakeResponse(status_code=429))
        provider = HttpLlmProvider(endpoint="http://llm.local", session=session)
        with pytest.raises(ProviderError) as err:
            provider.complete("s", "u")
        assert err.value.transient

    def test_malformed_body_reported(self):
        session = StubSession(FakeResponse(payload={"nope": []}))
        provider = HttpLlmProvider(endpoint="http://llm.local", session=session)
        with pytest.raises(ProviderError):
            provider.complete("s", "u")


class TestReplayLlmProvider:
    def test_store_then_complete_round_trip(self, tmp_path):
        provider = ReplayLlmProvider(tmp_path)
        provider.store("sys", "user", "fever | -72\n")
        assert provider.complete("sys", "user") == "fever | -72\n"

    def test_key_depends_on_both_messages(self, tmp_path):
        provider = ReplayLlmProvider(tmp_path)
        assert provider.key("a", "b") != provider.key("a", "c")
        assert provider.key("a", "b") != provider.key("b", "a")

    def test_missing_fixture_raises_with_key(self, tmp_path):
        provider = ReplayLlmProvider(tmp_path)
        with pytest.raises(ProviderError) as err:
            provider.complete("s", "u")
        assert provider.key("s", "u") in str(err.value)


class CountingProvider(HashEmbeddingProvider):
    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.calls = 0

    def embed_batch(self, texts):
        self.calls += len(texts)
        return super().embed_batch(texts)


class TestCachedEmbeddingProvider:
    def test_repeat_texts_hit_cache(self):
        inner = CountingProvider(dimension=8)
        cached = CachedEmbeddingProvider(inner)
        first = embed_batch(cached, ["a", "b", "a"])
        assert inner.calls == 2
        second = embed_batch(cached, ["a", "b"])
        assert inner.calls == 2
        assert np.array_equal(first[0], second[0])
