"""Lexical and embedding retrieval over one note's contextual chunks.

Each note is its own corpus: chunks are indexed against the note's own
brief-course summary, so index sizes stay in the hundreds. BM25 indexes
the rendered contextual text (context + core chunk); the semantic channel
keeps chunks whose embedding cosine against the query clears a threshold;
fusion is a duplicate-free union that preserves BM25 order first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .chunking import ContextualChunk
from .errors import (
    ChannelMismatch,
    DimensionMismatch,
    EmptyCorpus,
    UnknownChunk,
    ZeroVector,
)

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75
DEFAULT_TOP_K = 100
DEFAULT_THRESHOLD = 0.75


@dataclass(frozen=True)
class RetrievalResult:
    note_id: str
    chunk_ids: tuple[int, ...]
    scores: tuple[float, ...]
    channel: str  # bm25 | semantic | fused
    # fused only: which channels contributed each chunk id
    provenance: Mapping[int, tuple[str, ...]] | None = None


@dataclass
class Bm25Index:
    """Okapi BM25 statistics for one note's chunk set.

    idf uses the +1-inside-the-log form, ln(1 + (N - df + 0.5)/(df + 0.5)),
    which stays positive even for terms present in every chunk of a tiny
    per-note corpus.
    """

    note_id: str
    k1: float
    b: float
    chunk_ids: np.ndarray          # original chunk ids, row order
    doc_len: np.ndarray            # tokens per chunk (rendered text)
    avgdl: float
    vocab: dict[str, int]
    df: np.ndarray                 # per-term document frequency
    idf: np.ndarray
    post_start: np.ndarray         # CSR postings: term -> (chunk row, tf)
    post_end: np.ndarray
    post_chunk: np.ndarray
    post_tf: np.ndarray
    tf_maps: list[dict[str, int]] = field(repr=False, default_factory=list)
    _row_of: dict[int, int] = field(repr=False, default_factory=dict)

    @property
    def n_chunks(self) -> int:
        return int(self.chunk_ids.shape[0])


def _index_tokens(text: str) -> list[str]:
    return text.lower().split()


def build_index(
    chunks: Sequence[ContextualChunk],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> Bm25Index:
    """Index the rendered contextual text of each chunk."""
    if not chunks:
        raise EmptyCorpus("cannot index an empty chunk set")
    note_id = chunks[0].chunk.note_id
    texts = [c.rendered for c in chunks]
    ids = [c.chunk.chunk_id for c in chunks]
    return _build(note_id, ids, texts, k1, b)


def build_index_from_texts(
    texts: Sequence[str],
    note_id: str = "",
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    ids: Sequence[int] | None = None,
) -> Bm25Index:
    """Index raw strings directly; chunk ids default to positions."""
    if not texts:
        raise EmptyCorpus("cannot index an empty chunk set")
    if ids is None:
        ids = list(range(len(texts)))
    return _build(note_id, list(ids), list(texts), k1, b)


def _build(note_id: str, ids: Sequence[int], texts: Sequence[str],
           k1: float, b: float) -> Bm25Index:
    n = len(texts)
    vocab: dict[str, int] = {}
    tf_maps: list[dict[str, int]] = []
    doc_len = np.zeros(n, dtype=np.float64)
    for row, text in enumerate(texts):
        tokens = _index_tokens(text)
        doc_len[row] = len(tokens)
        tf: dict[str, int] = {}
        for tok in tokens:
            tf[tok] = tf.get(tok, 0) + 1
            if tok not in vocab:
                vocab[tok] = len(vocab)
        tf_maps.append(tf)

    n_terms = len(vocab)
    df = np.zeros(n_terms, dtype=np.float64)
    counts = np.zeros(n_terms, dtype=np.int64)
    for tf in tf_maps:
        for tok in tf:
            tid = vocab[tok]
            df[tid] += 1
            counts[tid] += 1

    post_start = np.zeros(n_terms, dtype=np.int64)
    if n_terms > 1:
        np.cumsum(counts[:-1], out=post_start[1:])
    post_end = post_start + counts
    total = int(counts.sum())
    post_chunk = np.zeros(total, dtype=np.int64)
    post_tf = np.zeros(total, dtype=np.float64)
    cursor = post_start.copy()
    for row, tf in enumerate(tf_maps):
        for tok, count in tf.items():
            tid = vocab[tok]
            post_chunk[cursor[tid]] = row
            post_tf[cursor[tid]] = count
            cursor[tid] += 1

    avgdl = float(doc_len.mean())
    idf = np.log1p((n - df + 0.5) / (df + 0.5))
    return Bm25Index(
        note_id=note_id,
        k1=k1,
        b=b,
        chunk_ids=np.asarray(ids, dtype=np.int64),
        doc_len=doc_len,
        avgdl=avgdl,
        vocab=vocab,
        df=df,
        idf=idf,
        post_start=post_start,
        post_end=post_end,
        post_chunk=post_chunk,
        post_tf=post_tf,
        tf_maps=tf_maps,
        _row_of={cid: row for row, cid in enumerate(ids)},
    )


def _query_terms(index: Bm25Index, query_tokens: Sequence[str]) -> list[tuple[str, int]]:
    """Distinct lowercased query terms with occurrence counts (bag semantics),
    in first-occurrence order."""
    counts: dict[str, int] = {}
    for tok in query_tokens:
        t = tok.lower()
        counts[t] = counts.get(t, 0) + 1
    return list(counts.items())


def bm25_score(index: Bm25Index, query_tokens: Sequence[str], chunk_id: int) -> float:
    """Score a single chunk; query terms absent from the chunk contribute 0."""
    row = index._row_of.get(chunk_id)
    if row is None:
        raise UnknownChunk(chunk_id)
    tf_map = index.tf_maps[row]
    if not tf_map:
        return 0.0
    dl = index.doc_len[row]
    norm = index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
    score = 0.0
    for term, q_count in _query_terms(index, query_tokens):
        tf = tf_map.get(term)
        if not tf:
            continue
        idf = index.idf[index.vocab[term]]
        score += q_count * idf * tf * (index.k1 + 1.0) / (tf + norm)
    return float(score)


def score_all(index: Bm25Index, query_tokens: Sequence[str]) -> np.ndarray:
    """Scores for every indexed chunk, row order; kernel-backed."""
    q_tids: list[int] = []
    q_weights: list[float] = []
    for term, count in _query_terms(index, query_tokens):
        tid = index.vocab.get(term)
        if tid is not None:
            q_tids.append(tid)
            q_weights.append(float(count))
    if not q_tids:
        return np.zeros(index.n_chunks, dtype=np.float64)
    return _kernels.bm25_scores(
        np.asarray(q_tids, dtype=np.int64),
        np.asarray(q_weights, dtype=np.float64),
        index.post_start,
        index.post_end,
        index.post_chunk,
        index.post_tf,
        index.idf,
        index.doc_len,
        index.avgdl,
        index.k1,
        index.b,
        index.n_chunks,
    )


def top_k(
    index: Bm25Index,
    query_tokens: Sequence[str],
    k: int = DEFAULT_TOP_K,
) -> RetrievalResult:
    """Top min(k, N) chunks by descending score, ties by ascending chunk id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = score_all(index, query_tokens)
    order = np.lexsort((index.chunk_ids, -scores))[: min(k, index.n_chunks)]
    return RetrievalResult(
        note_id=index.note_id,
        chunk_ids=tuple(int(index.chunk_ids[i]) for i in order),
        scores=tuple(float(scores[i]) for i in order),
        channel="bm25",
    )


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(u.shape[0], v.shape[0])
    nu = sqrt(float(u @ u))
    nv = sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(u @ v) / (nu * nv)


def semantic_filter(
    query_vec: np.ndarray,
    chunk_vecs: Sequence[np.ndarray] | np.ndarray,
    threshold: float = DEFAULT_THRESHOLD,
    chunk_ids: Sequence[int] | None = None,
    note_id: str = "",
    inclusive: bool = True,
) -> RetrievalResult:
    """Keep chunks whose cosine against the query clears the threshold.

    The boundary is inclusive (>=) by default; ``inclusive=False`` gives
    the strict reading. Results are sorted by descending score with ties
    broken by ascending chunk id.
    """
    q = np.asarray(query_vec, dtype=np.float64)
    mat = np.asarray(chunk_vecs, dtype=np.float64)
    if mat.size == 0:
        return RetrievalResult(note_id=note_id, chunk_ids=(), scores=(), channel="semantic")
    if mat.ndim != 2 or mat.shape[1] != q.shape[0]:
        raise DimensionMismatch(q.shape[0], mat.shape[1] if mat.ndim == 2 else -1)
    nq = np.linalg.norm(q)
    norms = np.linalg.norm(mat, axis=1)
    if nq == 0.0 or np.any(norms == 0.0):
        raise ZeroVector("cosine of a zero vector is undefined")
    sims = (mat @ q) / (norms * nq)
    ids = np.asarray(chunk_ids if chunk_ids is not None else range(mat.shape[0]),
                     dtype=np.int64)
    keep = sims >= threshold if inclusive else sims > threshold
    kept_ids = ids[keep]
    kept_sims = sims[keep]
    order = np.lexsort((kept_ids, -kept_sims))
    return RetrievalResult(
        note_id=note_id,
        chunk_ids=tuple(int(kept_ids[i]) for i in order),
        scores=tuple(float(kept_sims[i]) for i in order),
        channel="semantic",
    )


def fuse(bm25: RetrievalResult, semantic: RetrievalResult) -> RetrievalResult:
    """Duplicate-free union: BM25 order first, then semantic-only ids in
    semantic order. Per-id channel provenance is retained."""
    if bm25.channel != "bm25" or semantic.channel != "semantic":
        raise ChannelMismatch(
            f"expected (bm25, semantic) results, got ({bm25.channel}, {semantic.channel})"
        )
    if bm25.note_id != semantic.note_id:
        raise ChannelMismatch(
            f"results are for different notes: {bm25.note_id!r} vs {semantic.note_id!r}"
        )
    semantic_score = dict(zip(semantic.chunk_ids, semantic.scores))
    provenance: dict[int, tuple[str, ...]] = {}
    ids: list[int] = []
    scores: list[float] = []
    for cid, score in zip(bm25.chunk_ids, bm25.scores):
        ids.append(cid)
        scores.append(score)
        provenance[cid] = ("bm25", "semantic") if cid in semantic_score else ("bm25",)
    for cid, score in zip(semantic.chunk_ids, semantic.scores):
        if cid not in provenance:
            ids.append(cid)
            scores.append(score)
            provenance[cid] = ("semantic",)
    return RetrievalResult(
        note_id=bm25.note_id,
        chunk_ids=tuple(ids),
        scores=tuple(scores),
        channel="fused",
        provenance=provenance,
    )
