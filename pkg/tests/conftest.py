"""Shared fixtures: tiny corpora and deterministic provider doubles."""

from __future__ import annotations

import numpy as np
import pytest

from clinevents.corpus import NoteText, QueryText, write_notes, write_queries
from clinevents.errors import ProviderError
from clinevents.providers import EmbeddingProvider, LlmProvider


class ScriptedLlmProvider(LlmProvider):
    """Returns canned responses in call order; repeats the last one."""

    def __init__(self, *responses: str):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, system: str, user: str) -> str:
        self.calls += 1
        idx = min(self.calls - 1, len(self.responses) - 1)
        return self.responses[idx]


class FlakyLlmProvider(LlmProvider):
    """Fails ``failures`` times with a transient error, then succeeds."""

    def __init__(self, failures: int, response: str = "ok | 0"):
        self.failures = failures
        self.response = response
        self.calls = 0

    def complete(self, system: str, user: str) -> str:
        self.calls += 1
        if self.calls <= self.failures:
            raise ProviderError("service returned 500", transient=True)
        return self.response


class FixtureEmbeddingProvider(EmbeddingProvider):
    """Maps known texts to preset vectors; unknown texts get e_last."""

    def __init__(self, table: dict[str, np.ndarray], dimension: int):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.dimension = dimension

    def embed_batch(self, texts):
        fallback = np.zeros(self.dimension)
        fallback[-1] = 1.0
        return [self.table.get(t, fallback) for t in texts]


@pytest.fixture
def scripted_llm():
    return ScriptedLlmProvider


@pytest.fixture
def flaky_llm():
    return FlakyLlmProvider


@pytest.fixture
def fixture_embedder():
    return FixtureEmbeddingProvider


NOTES = [
    NoteText("n1", "h1", "Patient admitted with fever and chills. Started antibiotics on day two."),
    NoteText("n2", "h2", "Admitted after fall. Hip fracture on imaging. Surgery performed next morning."),
    NoteText("n3", "h3", "Chest pain three days prior. Troponin elevated. Cath lab showed stenosis."),
]

QUERIES = [
    QueryText("n1", "Fever treated with antibiotics, improved by discharge."),
    QueryText("n2", "Hip fracture repaired surgically without complication."),
    QueryText("n3", "Chest pain worked up, stenosis stented, stable at discharge."),
]


@pytest.fixture
def small_corpus(tmp_path):
    """Three joined notes/queries on disk, jsonl format."""
    notes_path = tmp_path / "notes.jsonl"
    queries_path = tmp_path / "queries.jsonl"
    write_notes(NOTES, notes_path)
    write_queries(QUERIES, queries_path)
    return notes_path, queries_path
