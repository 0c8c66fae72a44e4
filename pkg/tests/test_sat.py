"""Size-aware thresholding tests against a plain sort-based oracle."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ssodlab.errors import EmptyGroupError
from ssodlab.geometry import RotatedBox
from ssodlab.sat import (
    SatThresholds,
    apply_thresholds,
    collect_candidates,
    percentile_threshold,
    select_pseudo_labels,
)
from ssodlab.types import Detection

SMALL_BOX = RotatedBox(100.0, 100.0, 10.0, 10.0, 0.0)
LARGE_BOX = RotatedBox(500.0, 500.0, 64.0, 64.0, 0.0)


def det(score: float, small: bool = True) -> Detection:
    return Detection(box=SMALL_BOX if small else LARGE_BOX, category="c0", score=score)


score_lists = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=60)
percentiles = st.floats(min_value=0.0, max_value=100.0, allow_nan=False)


class TestPercentileThreshold:
    def test_nearest_rank_example(self):
        assert percentile_threshold([0.55, 0.6, 0.7, 0.8, 0.9], 40.0) == 0.6

    def test_zero_percentile_is_minimum(self):
        assert percentile_threshold([0.9, 0.2, 0.5], 0.0) == 0.2

    def test_hundred_percentile_is_maximum(self):
        assert percentile_threshold([0.9, 0.2, 0.5], 100.0) == 0.9

    def test_empty_group_signalled(self):
        with pytest.raises(EmptyGroupError):
            percentile_threshold([], 35.0)

    def test_out_of_range_percentile(self):
        with pytest.raises(ValueError):
            percentile_threshold([0.5], -1.0)
        with pytest.raises(ValueError):
            percentile_threshold([0.5], 100.5)

    @given(score_lists, percentiles)
    def test_matches_sort_oracle(self, scores, percentile):
        got = percentile_threshold(scores, percentile)
        assert got == oracles.percentile_nearest_rank(scores, percentile)

    @given(score_lists, percentiles)
    def test_threshold_is_an_observed_score(self, scores, percentile):
        assert percentile_threshold(scores, percentile) in scores

    @given(score_lists, percentiles, percentiles)
    def test_monotone_in_percentile(self, scores, p1, p2):
        lo, hi = min(p1, p2), max(p1, p2)
        assert percentile_threshold(scores, lo) <= percentile_threshold(scores, hi)


class TestCollectCandidates:
    def test_strictly_above_floor(self):
        preds = [det(0.5), det(0.500001), det(0.9)]
        kept = collect_candidates(preds, floor=0.5)
        assert [d.score for d in kept] == [0.500001, 0.9]

    def test_preserves_order(self):
        preds = [det(0.9), det(0.6), det(0.8)]
        assert [d.score for d in collect_candidates(preds)] == [0.9, 0.6, 0.8]


class TestSelectPseudoLabels:
    def test_worked_example(self):
        small = [det(s, small=True) for s in (0.55, 0.6, 0.65, 0.7, 0.75)]
        large = [det(s, small=False) for s in (0.8, 0.85, 0.9, 0.92, 0.95)]
        labels, thr = select_pseudo_labels(small + large, percentile=40.0, floor=0.5)
        assert thr.small_threshold == 0.6
        assert thr.large_threshold == 0.85
        assert thr.n_small_candidates == 5 and thr.n_large_candidates == 5
        assert thr.n_small_kept == 4 and thr.n_large_kept == 4
        assert len(labels) == 8

    def test_threshold_inclusive(self):
        small = [det(s) for s in (0.6, 0.7, 0.8, 0.9)]
        labels, thr = select_pseudo_labels(small, percentile=50.0)
        assert thr.small_threshold == 0.7
        assert 0.7 in [d.score for d in labels]

    def test_empty_small_group_falls_back_to_floor(self):
        large = [det(s, small=False) for s in (0.8, 0.9)]
        labels, thr = select_pseudo_labels(large, percentile=35.0, floor=0.5)
        assert thr.small_threshold == 0.5
        assert thr.n_small_candidates == 0 and thr.n_small_kept == 0
        assert thr.n_large_kept == len(labels) == 2

    def test_no_candidates_at_all(self):
        preds = [det(0.2), det(0.5, small=False)]
        labels, thr = select_pseudo_labels(preds, percentile=35.0, floor=0.5)
        assert labels == []
        assert thr.small_threshold == 0.5 and thr.large_threshold == 0.5

    def test_output_sorted_by_score_descending(self):
        preds = [det(0.7), det(0.95, small=False), det(0.8), det(0.9, small=False)]
        labels, _ = select_pseudo_labels(preds, percentile=0.0)
        scores = [d.score for d in labels]
        assert scores == sorted(scores, reverse=True)

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), max_size=40),
        st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), max_size=40),
        st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
    )
    @settings(max_examples=80)
    def test_counts_match_direct_recount(self, small_scores, large_scores, percentile):
        preds = [det(s, small=True) for s in small_scores]
        preds += [det(s, small=False) for s in large_scores]
        labels, thr = select_pseudo_labels(preds, percentile=percentile, floor=0.5)
        assert thr.n_small_kept + thr.n_large_kept == len(labels)
        small_cand = [s for s in small_scores if s > 0.5]
        if small_cand:
            expect = sum(1 for s in small_cand if s >= oracles.percentile_nearest_rank(small_cand, percentile))
            assert thr.n_small_kept == expect
        else:
            assert thr.n_small_kept == 0

    def test_kept_fraction_tracks_percentile(self):
        rng = np.random.default_rng(0)
        preds = [det(s) for s in rng.uniform(0.51, 1.0, 400)]
        for pct in (20.0, 50.0, 80.0):
            labels, _ = select_pseudo_labels(preds, percentile=pct, floor=0.5)
            expected = 1.0 - pct / 100.0
            assert len(labels) / 400 == pytest.approx(expected, abs=0.01)

    def test_counts_monotone_in_percentile(self):
        rng = np.random.default_rng(1)
        preds = [det(s, small=bool(i % 2)) for i, s in enumerate(rng.uniform(0.4, 1.0, 300))]
        counts = [len(select_pseudo_labels(preds, percentile=p)[0])
                  for p in (25.0, 30.0, 35.0, 40.0, 45.0, 50.0)]
        assert counts == sorted(counts, reverse=True)


def test_apply_thresholds_consistent_with_selection():
    rng = np.random.default_rng(2)
    preds = [det(s, small=bool(rng.integers(2))) for s in rng.uniform(0.0, 1.0, 200)]
    labels, thr = select_pseudo_labels(preds, percentile=35.0, floor=0.5)
    reapplied = apply_thresholds(preds, thr)
    assert sorted(d.score for d in reapplied) == sorted(d.score for d in labels)


def test_thresholds_dataclass_roundtrip():
    thr = SatThresholds(0.6, 0.85, 40.0, 0.5, 5, 5, 4, 4)
    assert thr.percentile == 40.0 and thr.floor == 0.5
