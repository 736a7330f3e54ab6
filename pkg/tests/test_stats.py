"""Dataset summary, funnel histograms, and concordance matching."""

import math
import random

import numpy as np
import pytest

from clinevents.errors import EmptySide, StageMismatch
from clinevents.providers import HashEmbeddingProvider
from clinevents.stats import concordance, funnel, summarize
from clinevents.timeline import make_record


def records_for(note_events):
    out = []
    for note_id, events in note_events.items():
        for event, hours in events:
            out.append(make_record(note_id, event, hours))
    return out


class TestSummarize:
    def test_empty_input_zeroed(self):
        stats = summarize([])
        assert stats.total_events == 0
        assert stats.notes == 0
        assert stats.pct_negative == 0.0

    def test_three_way_sign_split(self):
        records = records_for({"n": [("a", -1.0), ("b", 0.0), ("c", 2.0)]})
        stats = summarize(records)
        assert stats.pct_negative == pytest.approx(100 / 3)
        assert stats.pct_zero == pytest.approx(100 / 3)
        assert stats.pct_positive == pytest.approx(100 / 3)
        assert stats.pct_negative + stats.pct_zero + stats.pct_positive == pytest.approx(100.0)

    def test_fixture_counts_match_hand_tally(self):
        # 10 notes with 1..10 events each: 55 events, mean 5.5, max 10
        note_events = {
            f"n{i}": [(f"ev {j} text", float(j - i)) for j in range(i)]
            for i in range(1, 11)
        }
        stats = summarize(records_for(note_events))
        assert stats.total_events == 55
        assert stats.notes == 10
        assert stats.min_events == 1
        assert stats.max_events == 10
        assert stats.mean_events == pytest.approx(5.5)
        assert stats.mean_tokens_per_event == pytest.approx(3.0)

    def test_permutation_invariant(self):
        records = records_for({"a": [("x", 1.0), ("y", -2.0)], "b": [("z", 0.0)]})
        shuffled = records[::-1]
        assert summarize(records) == summarize(shuffled)

    def test_min_mean_max_ordering(self):
        rng = random.Random(4)
        for _ in range(20):
            note_events = {
                f"n{i}": [("e", float(rng.randrange(-5, 5)))
                          for _ in range(rng.randrange(1, 8))]
                for i in range(rng.randrange(1, 6))
            }
            stats = summarize(records_for(note_events))
            assert stats.min_events <= stats.mean_events <= stats.max_events


class TestFunnel:
    def test_expected_stage_sizes(self):
        sets = {
            "n1": {
                "original": list(range(400)),
                "bm25": list(range(100)),
                "semantic": list(range(50, 350)),
                "fused": list(range(350)),
                "llm": list(range(60)),
                "cleaned": list(range(40)),
            }
        }
        stats = funnel(sets)
        assert stats.histograms["bm25"] == {100: 1}
        assert stats.histograms["original"] == {400: 1}
        assert stats.warnings == []

    def test_flat_funnel(self):
        sets = {"n": {stage: [1, 2, 3] for stage in
                      ("original", "bm25", "semantic", "fused", "llm", "cleaned")}}
        stats = funnel(sets)
        assert all(hist == {3: 1} for hist in stats.histograms.values())

    def test_cleaned_exceeding_llm_warns(self):
        stats = funnel({"n": {"llm": [1], "cleaned": [1, 2, 3]}})
        assert any("cleaned" in w for w in stats.warnings)

    def test_non_subset_with_smaller_size_still_warns(self):
        stats = funnel({"n": {"original": [1, 2, 3], "bm25": [9]}})
        assert any("bm25" in w for w in stats.warnings)

    def test_unknown_stage_rejected(self):
        with pytest.raises(StageMismatch):
            funnel({"n": {"rerank": [1]}})

    def test_histograms_sum_to_note_count(self):
        rng = random.Random(8)
        sets = {}
        for i in range(30):
            sets[f"n{i}"] = {
                "original": list(range(rng.randrange(1, 20))),
                "bm25": list(range(rng.randrange(1, 10))),
            }
        stats = funnel(sets)
        for stage in ("original", "bm25"):
            assert sum(stats.histograms[stage].values()) == 30


class OrthogonalEmbedder(HashEmbeddingProvider):
    """Same text -> same basis vector; different texts are orthogonal."""

    def __init__(self, vocabulary, dimension=None):
        self.vocabulary = {text: i for i, text in enumerate(vocabulary)}
        self.dimension = dimension or len(self.vocabulary)

    def embed_batch(self, texts):
        out = []
        for text in texts:
            vec = np.zeros(self.dimension)
            vec[self.vocabulary[text]] = 1.0
            out.append(vec)
        return out


class TestConcordance:
    def test_identical_sets_full_match_and_unit_concordance(self):
        events = [("fever", -72.0), ("rash", 0.0), ("discharge", 48.0)]
        provider = OrthogonalEmbedder([e for e, _ in events])
        report = concordance(events, list(events), provider)
        assert report.match_rate == 1.0
        assert report.time_concordance == pytest.approx(1.0)
        assert report.n_matched == 3

    def test_disjoint_vocabulary_matches_nothing(self):
        ref = [("fever", 0.0), ("rash", 1.0)]
        cand = [("stroke", 0.0), ("fall", 1.0)]
        provider = OrthogonalEmbedder(["fever", "rash", "stroke", "fall"])
        report = concordance(ref, cand, provider)
        assert report.match_rate == 0.0
        assert math.isnan(report.time_concordance)

    def test_reversed_times_give_minus_one(self):
        ref = [("a", 1.0), ("b", 2.0), ("c", 3.0)]
        cand = [("a", 30.0), ("b", 20.0), ("c", 10.0)]
        provider = OrthogonalEmbedder(["a", "b", "c"])
        report = concordance(ref, cand, provider)
        assert report.match_rate == 1.0
        assert report.time_concordance == pytest.approx(-1.0)

    def test_empty_side_rejected(self):
        provider = OrthogonalEmbedder(["x"])
        with pytest.raises(EmptySide):
            concordance([], [("x", 0.0)], provider)

    def test_match_is_one_to_one(self):
        # two candidates identical to one reference: only one may match
        ref = [("fever", 0.0)]
        cand = [("fever", 1.0), ("fever", 2.0)]
        provider = OrthogonalEmbedder(["fever"])
        report = concordance(ref, cand, provider)
        assert report.n_matched == 1
        assert report.match_rate == 1.0

    def test_distance_threshold_excludes_far_pairs(self):
        class Fixed(HashEmbeddingProvider):
            def __init__(self):
                self.dimension = 2

            def embed_batch(self, texts):
                table = {
                    "near": np.array([1.0, 0.0]),
                    "ref": np.array([0.999, math.sqrt(1 - 0.999**2)]),
                    "far": np.array([0.0, 1.0]),
                }
                return [table[t] for t in texts]

        report = concordance(
            [("ref", 0.0)], [("near", 0.0), ("far", 1.0)], Fixed(), max_distance=0.1
        )
        assert report.n_matched == 1

    def test_optimal_assignment_flag(self):
        events = [("a", 1.0), ("b", 2.0)]
        provider = OrthogonalEmbedder(["a", "b"])
        report = concordance(events, list(events), provider, assignment="optimal")
        assert report.match_rate == 1.0
        assert report.assignment == "optimal"

    def test_pearson_method_flag(self):
        events = [("a", 1.0), ("b", 2.0), ("c", 5.0)]
        provider = OrthogonalEmbedder(["a", "b", "c"])
        report = concordance(events, list(events), provider, method="pearson")
        assert report.time_concordance == pytest.approx(1.0)
        assert report.method == "pearson"
