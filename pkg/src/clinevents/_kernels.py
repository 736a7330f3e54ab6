"""Hot scoring kernels.

The BM25 scorer walks postings lists for every chunk of a note against a
~500-token query, which dominates runtime on large corpora. The kernel is
JIT-compiled with numba when available; setting CLINEVENTS_NO_NUMBA=1 (or
running without numba installed) selects a pure-numpy path that computes
the same sums in the same order, so both paths are bit-compatible.

See benchmarks/bench_bm25.py for a side-by-side timing of the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "CLINEVENTS_NO_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def _bm25_scores_numpy(
    q_tids: np.ndarray,
    q_weights: np.ndarray,
    post_start: np.ndarray,
    post_end: np.ndarray,
    post_chunk: np.ndarray,
    post_tf: np.ndarray,
    idf: np.ndarray,
    doc_len: np.ndarray,
    avgdl: float,
    k1: float,
    b: float,
    n_chunks: int,
) -> np.ndarray:
    """Term-at-a-time accumulation; chunk ids are unique within a posting."""
    scores = np.zeros(n_chunks, dtype=np.float64)
    norm = k1 * (1.0 - b + b * doc_len / avgdl)
    for qi in range(q_tids.shape[0]):
        t = q_tids[qi]
        sl = slice(post_start[t], post_end[t])
        chunks = post_chunk[sl]
        tf = post_tf[sl]
        scores[chunks] += q_weights[qi] * idf[t] * tf * (k1 + 1.0) / (tf + norm[chunks])
    return scores


USING_NUMBA = False
bm25_scores = _bm25_scores_numpy

if not _numba_disabled():
    try:
        from numba import njit
    except ImportError:
        pass
    else:
        @njit(cache=True)
        def _bm25_scores_njit(
            q_tids, q_weights, post_start, post_end, post_chunk, post_tf,
            idf, doc_len, avgdl, k1, b, n_chunks,
        ):
            scores = np.zeros(n_chunks, dtype=np.float64)
            for qi in range(q_tids.shape[0]):
                t = q_tids[qi]
                w = q_weights[qi]
                for p in range(post_start[t], post_end[t]):
                    c = post_chunk[p]
                    tf = post_tf[p]
                    denom = tf + k1 * (1.0 - b + b * doc_len[c] / avgdl)
                    scores[c] += w * idf[t] * tf * (k1 + 1.0) / denom
            return scores

        bm25_scores = _bm25_scores_njit
        USING_NUMBA = True
