"""Dataset statistics, the per-stage chunk funnel, and annotation concordance."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import pearsonr, spearmanr

from .errors import EmptySide, StageMismatch
from .providers import EmbeddingProvider, embed_batch
from .timeline import EventRecord

logger = logging.getLogger(__name__)

FUNNEL_STAGES = ("original", "bm25", "semantic", "fused", "llm", "cleaned")

DEFAULT_MAX_DISTANCE = 0.1


@dataclass
class DatasetStats:
    total_events: int = 0
    notes: int = 0
    min_events: int = 0
    max_events: int = 0
    mean_events: float = 0.0
    mean_tokens_per_event: float = 0.0
    max_tokens_per_event: int = 0
    pct_negative: float = 0.0
    pct_zero: float = 0.0
    pct_positive: float = 0.0


@dataclass
class FunnelStats:
    # per stage: histogram of per-note set sizes
    histograms: dict[str, dict[int, int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class ConcordanceReport:
    match_rate: float
    time_concordance: float
    n_reference: int
    n_candidate: int
    n_matched: int
    method: str = "spearman"
    assignment: str = "greedy"


def summarize(records: Sequence[EventRecord]) -> DatasetStats:
    """Corpus-level counts and the sign split of event timestamps."""
    if not records:
        return DatasetStats()
    per_note = Counter(r.hadm_id for r in records)
    counts = list(per_note.values())
    token_counts = [len(r.event.split()) for r in records]
    total = len(records)
    negative = sum(1 for r in records if r.time_hours < 0)
    zero = sum(1 for r in records if r.time_hours == 0)
    positive = total - negative - zero
    return DatasetStats(
        total_events=total,
        notes=len(per_note),
        min_events=min(counts),
        max_events=max(counts),
        mean_events=total / len(per_note),
        mean_tokens_per_event=sum(token_counts) / total,
        max_tokens_per_event=max(token_counts),
        pct_negative=100.0 * negative / total,
        pct_zero=100.0 * zero / total,
        pct_positive=100.0 * positive / total,
    )


def funnel(stage_sets: Mapping[str, Mapping[str, Sequence[int]]]) -> FunnelStats:
    """Histogram per-note chunk-set sizes for each pipeline stage.

    ``stage_sets`` maps note_id -> stage -> chunk ids. Stage-size
    violations (a later stage larger than the one that feeds it) are
    reported as warnings, never fatal.
    """
    stats = FunnelStats(histograms={stage: {} for stage in FUNNEL_STAGES})
    for note_id, stages in stage_sets.items():
        id_sets: dict[str, set] = {}
        for stage, ids in stages.items():
            if stage not in FUNNEL_STAGES:
                raise StageMismatch(stage)
            id_sets[stage] = set(ids)
            hist = stats.histograms[stage]
            size = len(id_sets[stage])
            hist[size] = hist.get(size, 0) + 1
        for narrow, wide in (
            ("bm25", "original"),
            ("semantic", "original"),
            ("fused", "original"),
            ("cleaned", "llm"),
        ):
            if narrow in id_sets and wide in id_sets:
                strays = id_sets[narrow] - id_sets[wide]
                if strays:
                    stats.warnings.append(
                        f"note {note_id}: {len(strays)} {narrow}-stage chunks "
                        f"missing from {wide} (e.g. {sorted(strays)[0]})"
                    )
        if (
            "fused" in id_sets
            and "bm25" in id_sets
            and "semantic" in id_sets
            and len(id_sets["fused"]) > len(id_sets["bm25"]) + len(id_sets["semantic"])
        ):
            stats.warnings.append(
                f"note {note_id}: fused stage exceeds bm25 + semantic"
            )
    for warning in stats.warnings:
        logger.warning("%s", warning)
    return stats


def _greedy_match(dist: np.ndarray, max_distance: float) -> list[tuple[int, int]]:
    """Repeatedly take the globally closest unmatched (reference, candidate)
    pair; ties break by lower reference then candidate index."""
    n_ref, n_cand = dist.shape
    order = np.argsort(dist, axis=None, kind="stable")
    ref_used = np.zeros(n_ref, dtype=bool)
    cand_used = np.zeros(n_cand, dtype=bool)
    matched: list[tuple[int, int]] = []
    for flat in order:
        i, j = divmod(int(flat), n_cand)
        if dist[i, j] > max_distance:
            break
        if ref_used[i] or cand_used[j]:
            continue
        ref_used[i] = True
        cand_used[j] = True
        matched.append((i, j))
    return matched


def _optimal_match(dist: np.ndarray, max_distance: float) -> list[tuple[int, int]]:
    rows, cols = linear_sum_assignment(dist)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if dist[i, j] <= max_distance]


def concordance(
    reference: Sequence[tuple[str, float]],
    candidate: Sequence[tuple[str, float]],
    provider: EmbeddingProvider,
    max_distance: float = DEFAULT_MAX_DISTANCE,
    method: str = "spearman",
    assignment: str = "greedy",
) -> ConcordanceReport:
    """Agreement between two (event, time) annotation sets.

    Candidates are matched one-to-one to reference events by cosine
    distance (1 - cosine) under ``max_distance``; match_rate is the matched
    fraction of the reference side and time_concordance the rank
    correlation of matched timestamps (NaN when fewer than two matches).
    """
    if not reference or not candidate:
        raise EmptySide("both annotation sets must be non-empty")
    ref_texts = [e for e, _ in reference]
    cand_texts = [e for e, _ in candidate]
    vectors = embed_batch(provider, ref_texts + cand_texts)
    mat = np.stack(vectors)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    unit = mat / norms
    ref_vecs = unit[: len(ref_texts)]
    cand_vecs = unit[len(ref_texts):]
    dist = 1.0 - ref_vecs @ cand_vecs.T

    if assignment == "greedy":
        matched = _greedy_match(dist, max_distance)
    elif assignment == "optimal":
        matched = _optimal_match(dist, max_distance)
    else:
        raise ValueError(f"unknown assignment {assignment!r}")

    if len(matched) >= 2:
        ref_times = [reference[i][1] for i, _ in matched]
        cand_times = [candidate[j][1] for _, j in matched]
        if method == "spearman":
            rho = spearmanr(ref_times, cand_times).statistic
        elif method == "pearson":
            rho = pearsonr(ref_times, cand_times).statistic
        else:
            raise ValueError(f"unknown method {method!r}")
        rho = float(rho)
    else:
        rho = float("nan")

    return ConcordanceReport(
        match_rate=len(matched) / len(reference),
        time_concordance=rho,
        n_reference=len(reference),
        n_candidate=len(candidate),
        n_matched=len(matched),
        method=method,
        assignment=assignment,
    )
