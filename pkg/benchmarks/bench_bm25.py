"""Benchmark the BM25 scoring kernel: numba njit vs pure numpy.

Builds synthetic per-note corpora sized like real discharge notes
(hundreds of chunks, ~500-token queries) and times full-corpus scoring
on both paths. The numpy path is what you get with CLINEVENTS_NO_NUMBA=1.

Run: python benchmarks/bench_bm25.py [--notes 200] [--chunks 400]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clinevents import _kernels
from clinevents.retrieval import build_index_from_texts, score_all


def synthetic_corpus(rng: np.random.Generator, n_chunks: int, vocab: int = 2000):
    words = [f"w{i}" for i in range(vocab)]
    texts = [
        " ".join(rng.choice(words, size=25)) for _ in range(n_chunks)
    ]
    query = " ".join(rng.choice(words, size=500))
    return texts, query


def run(kernel, indexes, queries) -> float:
    t0 = time.perf_counter()
    sink = 0.0
    for index, query in zip(indexes, queries):
        sink += float(score_all(index, query).sum())
    elapsed = time.perf_counter() - t0
    print(f"  checksum {sink:.3f}")
    return elapsed


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--notes", type=int, default=200)
    parser.add_argument("--chunks", type=int, default=400)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    indexes = []
    queries = []
    for _ in range(args.notes):
        texts, query = synthetic_corpus(rng, args.chunks)
        indexes.append(build_index_from_texts(texts))
        queries.append(query.split())

    if not _kernels.USING_NUMBA:
        print("numba path unavailable (disabled or not installed); timing numpy only")
        elapsed = run(_kernels.bm25_scores, indexes, queries)
        print(f"numpy : {elapsed:.3f}s for {args.notes} notes x {args.chunks} chunks")
        return

    njit_kernel = _kernels.bm25_scores
    numpy_kernel = _kernels._bm25_scores_numpy

    # warm the JIT before timing
    score_all(indexes[0], queries[0])

    _kernels.bm25_scores = njit_kernel
    t_njit = run(njit_kernel, indexes, queries)
    _kernels.bm25_scores = numpy_kernel
    t_numpy = run(numpy_kernel, indexes, queries)
    _kernels.bm25_scores = njit_kernel

    print(f"njit  : {t_njit:.3f}s for {args.notes} notes x {args.chunks} chunks")
    print(f"numpy : {t_numpy:.3f}s for {args.notes} notes x {args.chunks} chunks")
    print(f"speedup: {t_numpy / t_njit:.2f}x")


if __name__ == "__main__":
    main()
