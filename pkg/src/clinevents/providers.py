"""Pluggable contracts for external embedding and LLM services.

HTTP implementations speak minimal JSON protocols; the hash embedder and
the replay LLM provider are deterministic stand-ins that make the whole
pipeline hermetic for tests and offline runs.
"""

from __future__ import annotations

import hashlib
import logging
import os
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .errors import DimensionMismatch, ProviderError, ProviderTimeout

logger = logging.getLogger(__name__)

ENV_EMBEDDING_ENDPOINT = "CLINEVENTS_EMBEDDING_ENDPOINT"
ENV_EMBEDDING_TOKEN = "CLINEVENTS_EMBEDDING_TOKEN"
ENV_LLM_ENDPOINT = "CLINEVENTS_LLM_ENDPOINT"
ENV_LLM_API_KEY = "CLINEVENTS_LLM_API_KEY"
ENV_LLM_MODEL = "CLINEVENTS_LLM_MODEL"


def _content_key(*parts: str) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1e")
    return h.hexdigest()


# --- embeddings -------------------------------------------------------------

class EmbeddingProvider(ABC):
    """Maps texts to fixed-dimension vectors, order preserved."""

    dimension: int

    @abstractmethod
    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        ...


def embed(provider: EmbeddingProvider, text: str) -> np.ndarray:
    """Embed one text and enforce the provider's declared contract."""
    return embed_batch(provider, [text])[0]


def embed_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> list[np.ndarray]:
    vectors = provider.embed_batch(texts)
    if len(vectors) != len(texts):
        raise ProviderError(
            f"provider returned {len(vectors)} vectors for {len(texts)} texts"
        )
    out = []
    for vec in vectors:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (provider.dimension,):
            raise DimensionMismatch(provider.dimension, int(arr.size))
        if not np.all(np.isfinite(arr)):
            raise ProviderError("provider returned non-finite embedding values")
        out.append(arr)
    return out


class HttpEmbeddingProvider(EmbeddingProvider):
    """POST {"texts": [...]} -> {"vectors": [[...], ...]}.

    Endpoint and bearer token fall back to CLINEVENTS_EMBEDDING_ENDPOINT /
    CLINEVENTS_EMBEDDING_TOKEN.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        dimension: int = 1024,
        token: str | None = None,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint or os.environ.get(ENV_EMBEDDING_ENDPOINT, "")
        if not self.endpoint:
            raise ProviderError("no embedding endpoint configured")
        self.dimension = dimension
        self.token = token if token is not None else os.environ.get(ENV_EMBEDDING_TOKEN)
        self.timeout = timeout
        self.session = session or requests.Session()

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self.session.post(
                self.endpoint,
                json={"texts": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.Timeout as exc:
            raise ProviderTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise ProviderError(str(exc), transient=True) from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise ProviderError(f"embedding service returned {resp.status_code}", transient=True)
        if resp.status_code >= 400:
            raise ProviderError(f"embedding service returned {resp.status_code}")
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
        return [np.asarray(v, dtype=np.float64) for v in vectors]


class HashEmbeddingProvider(EmbeddingProvider):
    """Deterministic mock: text content seeds a PRNG that draws a unit vector.

    The same text always maps to the same vector, across processes and
    platforms, which makes retrieval runs reproducible without a model.
    """

    def __init__(self, dimension: int = 1024, seed: int = 0):
        self.dimension = dimension
        self.seed = seed

    def _vector(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec = rng.standard_normal(self.dimension)
        return vec / np.linalg.norm(vec)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self._vector(t) for t in texts]


class CachedEmbeddingProvider(EmbeddingProvider):
    """Content-hash cache in front of another provider."""

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.dimension = inner.dimension
        self._cache: dict[str, np.ndarray] = {}

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        keys = [_content_key(t) for t in texts]
        missing: list[str] = []
        pending: set[str] = set()
        for text, key in zip(texts, keys):
            if key not in self._cache and key not in pending:
                pending.add(key)
                missing.append(text)
        if missing:
            fresh = self.inner.embed_batch(missing)
            for text, vec in zip(missing, fresh):
                self._cache[_content_key(text)] = np.asarray(vec, dtype=np.float64)
        return [self._cache[k] for k in keys]


# --- LLM --------------------------------------------------------------------

class LlmProvider(ABC):
    """Chat-style completion: one system message, one user message."""

    @abstractmethod
    def complete(self, system: str, user: str) -> str:
        ...


class HttpLlmProvider(LlmProvider):
    """OpenAI-compatible chat completion endpoint."""

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        temperature: float = 0.0,
        max_tokens: int = 4096,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint or os.environ.get(ENV_LLM_ENDPOINT, "")
        if not self.endpoint:
            raise ProviderError("no LLM endpoint configured")
        self.model = model or os.environ.get(ENV_LLM_MODEL, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_LLM_API_KEY)
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, system: str, user: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        try:
            resp = self.session.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise ProviderTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise ProviderError(str(exc), transient=True) from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise ProviderError(f"LLM service returned {resp.status_code}", transient=True)
        if resp.status_code >= 400:
            raise ProviderError(f"LLM service returned {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as exc:
            raise ProviderError(f"malformed LLM response: {exc}") from exc


class ReplayLlmProvider(LlmProvider):
    """Serves canned responses keyed by the content hash of the prompt.

    Fixture files live under ``root`` as ``<sha256>.txt``. ``store`` writes
    them, so a test (or a recorded live run) can seed the directory and the
    pipeline replays byte-identically afterwards.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @staticmethod
    def key(system: str, user: str) -> str:
        return _content_key(system, user)

    def path_for(self, system: str, user: str) -> Path:
        return self.root / f"{self.key(system, user)}.txt"

    def store(self, system: str, user: str, response: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(system, user)
        path.write_text(response, encoding="utf-8")
        return path

    def complete(self, system: str, user: str) -> str:
        path = self.path_for(system, user)
        if not path.exists():
            raise ProviderError(f"no replay fixture for prompt (key {path.stem})")
        return path.read_text(encoding="utf-8")
