"""Clustering behavior: seeding, absorption, creation, condensation."""

import itertools
import math

import numpy as np
import pytest

from cbcl import (
    DimensionMismatchError,
    FusionWeights,
    TrainConfig,
    ValidationError,
    centroid_stats,
    condense,
    fit,
    fused_distance,
)
from cbcl.model_io import model_to_bytes
from helpers import make_pair, one_d_pair, random_instance, replay_trace

W11 = FusionWeights(1.0, 1.0)


def cfg(threshold, w=W11, **kwargs):
    return TrainConfig(distance_threshold=threshold, fusion=w, **kwargs)


class TestFit:
    def test_one_sample_per_category_seeds_one_centroid(self):
        data = [(one_d_pair(0, 1.0), "a"), (one_d_pair(1, 5.0), "b")]
        model, trace = fit(data, cfg(2.0))
        for cat, value in zip(model.categories, [1.0, 5.0]):
            assert len(cat.centroids) == 1
            assert cat.centroids[0].weight == 1
            assert cat.centroids[0].rgb[0] == value
        assert all(rec.action == "seed" for rec in trace.records)

    def test_hand_simulated_stream(self):
        # samples 0, 1, 10 at threshold 2: the second absorbs (distance 1),
        # the third creates (distance to the moved centroid is 9.5).
        data = [(one_d_pair(i, v), "a") for i, v in enumerate([0.0, 1.0, 10.0])]
        model, _ = fit(data, cfg(2.0))
        centroids = model.categories[0].centroids
        assert len(centroids) == 2
        assert centroids[0].rgb[0] == 0.5 and centroids[0].weight == 2
        assert centroids[1].rgb[0] == 10.0 and centroids[1].weight == 1

    def test_threshold_below_min_distance_memorizes(self):
        rng = np.random.default_rng(0)
        data = [(make_pair(i, rng.normal(size=3), rng.normal(size=3)), "a") for i in range(12)]
        # a centroid built from one sample equals that sample, so pairwise
        # sample distances bound the absorb decision
        min_dist = min(
            fused_distance(_centroid_of(data[i][0]), data[j][0], W11)
            for i, j in itertools.combinations(range(12), 2)
        )
        model, _ = fit(data, cfg(min_dist * 0.999))
        assert len(model.categories[0].centroids) == 12
        assert all(c.weight == 1 for c in model.categories[0].centroids)

    def test_infinite_threshold_yields_category_mean(self):
        rng = np.random.default_rng(1)
        vectors = rng.normal(size=(9, 4))
        data = [(make_pair(i, vectors[i], vectors[i]), "a") for i in range(9)]
        model, _ = fit(data, cfg(math.inf))
        cat = model.categories[0]
        assert len(cat.centroids) == 1
        assert cat.centroids[0].weight == 9
        expected = np.mean(vectors.astype(np.float32), axis=0, dtype=np.float64)
        assert np.allclose(cat.centroids[0].rgb, expected, rtol=1e-6, atol=1e-12)

    def test_train_count_matches_label_counts(self):
        rng = np.random.default_rng(2)
        data, threshold, w_rgb, w_depth = random_instance(rng)
        model, _ = fit(data, cfg(threshold, FusionWeights(w_rgb, w_depth)))
        counts = {}
        for _, label in data:
            counts[label] = counts.get(label, 0) + 1
        for cat in model.categories:
            assert cat.train_count == counts[cat.label]
            assert sum(c.weight for c in cat.centroids) == counts[cat.label]

    def test_trace_replay_confirms_threshold_rule(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            data, threshold, w_rgb, w_depth = random_instance(rng)
            config = cfg(threshold, FusionWeights(w_rgb, w_depth))
            model, trace = fit(data, config)
            ids = [rec.sample_id for rec in trace.records]
            assert sorted(ids) == sorted(pair.id for pair, _ in data)
            states = replay_trace(data, config, trace)
            for cat in model.categories:
                assert len(states[cat.label]) == len(cat.centroids)

    def test_mean_consistency_against_trace_groups(self):
        rng = np.random.default_rng(4)
        data, threshold, w_rgb, w_depth = random_instance(rng)
        model, trace = fit(data, cfg(threshold, FusionWeights(w_rgb, w_depth)))
        by_id = {pair.id: pair for pair, _ in data}
        for (label, index), member_ids in trace.by_centroid().items():
            cat = model.category(label)
            members_rgb = np.stack([by_id[i].rgb for i in member_ids])
            expected = members_rgb.mean(axis=0, dtype=np.float64)
            assert np.allclose(cat.centroids[index].rgb, expected, rtol=1e-6, atol=1e-30)

    def test_category_independence(self):
        rng = np.random.default_rng(5)
        data, threshold, w_rgb, w_depth = random_instance(rng, max_categories=4)
        config = cfg(threshold, FusionWeights(w_rgb, w_depth))
        model_a, _ = fit(data, config)
        # category-blockwise permutation keeps within-category order
        blocks = {}
        for pair, label in data:
            blocks.setdefault(label, []).append((pair, label))
        reordered = [item for label in sorted(blocks, reverse=True) for item in blocks[label]]
        model_b, _ = fit(reordered, config)
        assert model_to_bytes(model_a) == model_to_bytes(model_b)

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(6)
        data, threshold, w_rgb, w_depth = random_instance(rng)
        config = cfg(threshold, FusionWeights(w_rgb, w_depth))
        assert model_to_bytes(fit(data, config)[0]) == model_to_bytes(fit(data, config)[0])

    def test_seeded_shuffle_is_deterministic(self):
        rng = np.random.default_rng(7)
        data, threshold, w_rgb, w_depth = random_instance(rng, max_samples=30)
        config = cfg(threshold, FusionWeights(w_rgb, w_depth), order_policy="seeded-shuffle", seed=99)
        assert model_to_bytes(fit(data, config)[0]) == model_to_bytes(fit(data, config)[0])

    def test_equidistant_sample_absorbs_into_lowest_index(self):
        # centroids at 0 and 2 exist; a sample at 1 is exactly distance 1
        # from both and must fold into index 0.
        data = [(one_d_pair(0, 0.0), "a"), (one_d_pair(1, 2.0), "a"), (one_d_pair(2, 1.0), "a")]
        model, trace = fit(data, cfg(1.5))
        assert [r.action for r in trace.records] == ["seed", "create", "absorb"]
        assert trace.records[2].centroid_index == 0
        assert model.categories[0].centroids[0].rgb[0] == 0.5

    def test_distance_exactly_at_threshold_creates(self):
        data = [(one_d_pair(0, 0.0), "a"), (one_d_pair(1, 1.0), "a")]
        model, trace = fit(data, cfg(1.0))
        assert trace.records[1].action == "create"
        assert len(model.categories[0].centroids) == 2

    def test_empty_data_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            fit([], cfg(1.0))

    def test_dimension_mismatch_names_sample_id(self):
        data = [(one_d_pair(0, 0.0), "a"), (make_pair(17, [0.0, 1.0], [0.0]), "a")]
        with pytest.raises(DimensionMismatchError, match="17"):
            fit(data, cfg(1.0))

    def test_categories_sorted_by_label(self):
        data = [(one_d_pair(0, 0.0), "zebra"), (one_d_pair(1, 1.0), "ant")]
        model, _ = fit(data, cfg(0.5))
        assert model.labels == ("ant", "zebra")


def _centroid_of(pair):
    from cbcl import CentroidPair

    return CentroidPair(rgb=pair.rgb, depth=pair.depth, weight=1)


class TestCondense:
    def _two_centroid_model(self):
        data = [(one_d_pair(0, 0.0), "a"), (one_d_pair(1, 0.0), "a"), (one_d_pair(2, 3.0), "a")]
        model, _ = fit(data, cfg(1.0))
        assert [c.weight for c in model.categories[0].centroids] == [2, 1]
        return model

    def test_infinite_threshold_collapses_to_weighted_mean(self):
        model = self._two_centroid_model()
        condensed = condense(model, math.inf)
        cat = condensed.categories[0]
        assert len(cat.centroids) == 1
        assert cat.centroids[0].weight == 3
        assert cat.centroids[0].rgb[0] == pytest.approx(1.0, abs=1e-7)

    def test_no_merge_below_min_distance_keeps_model(self):
        model = self._two_centroid_model()
        with pytest.warns(UserWarning, match="not larger"):
            condensed = condense(model, 0.5)
        for before, after in zip(model.categories[0].centroids, condensed.categories[0].centroids):
            assert np.array_equal(before.rgb, after.rgb)
            assert before.weight == after.weight

    def test_worked_example(self):
        model = self._two_centroid_model()
        condensed = condense(model, 5.0)
        cat = condensed.categories[0]
        assert len(cat.centroids) == 1
        assert cat.centroids[0].weight == 3
        # (2*0 + 1*3) / 3
        assert cat.centroids[0].rgb[0] == pytest.approx(1.0, abs=1e-7)

    def test_weight_conservation_and_count_monotonicity(self):
        rng = np.random.default_rng(8)
        data, threshold, w_rgb, w_depth = random_instance(rng)
        model, _ = fit(data, cfg(threshold, FusionWeights(w_rgb, w_depth)))
        condensed = condense(model, threshold * 2.0)
        for before, after in zip(model.categories, condensed.categories):
            assert sum(c.weight for c in after.centroids) == before.train_count
            assert len(after.centroids) <= len(before.centroids)
        assert condensed.distance_threshold == threshold * 2.0

    def test_invalid_threshold(self):
        model = self._two_centroid_model()
        with pytest.raises(ValidationError):
            condense(model, 0.0)


class TestCentroidStats:
    def test_single_sample_categories(self):
        data = [(one_d_pair(i, float(i) * 10), f"c{i}") for i in range(3)]
        model, _ = fit(data, cfg(1.0))
        stats = centroid_stats(model)
        assert all(s.centroid_count == 1 for s in stats.categories)
        assert all(s.min_weight == s.max_weight == 1 for s in stats.categories)
        assert stats.total_centroids == 3

    def test_weight_sums_equal_train_counts(self):
        rng = np.random.default_rng(9)
        data, threshold, w_rgb, w_depth = random_instance(rng)
        model, _ = fit(data, cfg(threshold, FusionWeights(w_rgb, w_depth)))
        stats = centroid_stats(model)
        for s, cat in zip(stats.categories, model.categories):
            assert s.train_count == cat.train_count
            assert s.min_weight <= s.mean_weight <= s.max_weight

    def test_after_full_condense_one_centroid_per_category(self):
        rng = np.random.default_rng(10)
        data, threshold, w_rgb, w_depth = random_instance(rng, max_categories=3)
        model, _ = fit(data, cfg(threshold, FusionWeights(w_rgb, w_depth)))
        stats = centroid_stats(condense(model, math.inf))
        assert stats.total_centroids == len(model.categories)
