import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tabasco.centroids import (adaptive_centroid, build_class_statistics, class_mean_confidence,
                               confidence_threshold, cosine_similarity, high_confidence_set, purity,
                               target_class)
from tabasco.errors import DegenerateConfidenceError, EmptyClassError, MissingTruthError, ZeroNormError


class TestMeanConfidence:
    def test_matches_column_mean(self, rng):
        probs = rng.dirichlet(np.ones(5), size=30)
        np.testing.assert_allclose(class_mean_confidence(probs), probs.sum(axis=0) / 30)

    def test_empty_class_rejected(self):
        with pytest.raises(EmptyClassError):
            class_mean_confidence(np.empty((0, 3)))

    def test_target_class_tie_goes_to_smallest_index(self):
        assert target_class([0.4, 0.4, 0.2]) == 0
        assert target_class([0.1, 0.45, 0.45]) == 1


class TestThreshold:
    def test_worked_example(self):
        # target confidences 0.2 and 0.8, mean 0.5 -> weights 1 and 1.6
        probs = np.array([[0.2, 0.8], [0.8, 0.2]])
        mean = class_mean_confidence(probs)
        assert target_class(mean) == 0
        h = confidence_threshold(probs, 0, mean)
        assert h == pytest.approx((0.2 + 1.6 * 0.8) / 2)
        assert h == pytest.approx(0.74)
        np.testing.assert_array_equal(high_confidence_set([5, 9], probs, 0, h), [9])

    def test_never_below_plain_mean(self, rng):
        probs = rng.dirichlet(np.ones(4), size=40)
        mean = class_mean_confidence(probs)
        t = target_class(mean)
        assert confidence_threshold(probs, t, mean) >= mean[t] - 1e-12

    def test_zero_target_mean_is_degenerate(self):
        probs = np.array([[0.0, 1.0], [0.0, 1.0]])
        with pytest.raises(DegenerateConfidenceError):
            confidence_threshold(probs, 0, class_mean_confidence(probs))


class TestHighConfidenceSet:
    def test_strictly_above(self):
        probs = np.array([[0.5, 0.5], [0.7, 0.3], [0.9, 0.1]])
        np.testing.assert_array_equal(high_confidence_set([0, 1, 2], probs, 0, 0.7), [2])

    def test_fallback_to_most_confident_smallest_id(self):
        probs = np.array([[0.6, 0.4], [0.6, 0.4], [0.3, 0.7]])
        np.testing.assert_array_equal(high_confidence_set([8, 3, 1], probs, 0, 0.95), [3])

    def test_output_sorted(self):
        probs = np.array([[0.9, 0.1], [0.95, 0.05], [0.1, 0.9]])
        np.testing.assert_array_equal(high_confidence_set([7, 2, 4], probs, 0, 0.5), [2, 7])


class TestCentroid:
    def test_mean_of_members(self):
        feats = np.array([[1.0, 0.0], [3.0, 2.0], [100.0, 100.0]])
        np.testing.assert_allclose(adaptive_centroid([0, 1, 2], feats, [0, 1]), [2.0, 1.0])

    def test_empty_members_raise(self):
        with pytest.raises(RuntimeError):
            adaptive_centroid([0, 1], np.ones((2, 2)), [5])

    def test_statistics_bundle(self):
        probs = np.array([[0.2, 0.8], [0.8, 0.2]])
        feats = np.array([[0.0, 1.0], [2.0, 0.0]])
        stats = build_class_statistics(0, [5, 9], probs, feats)
        assert stats.target_class == 0 and stats.size == 2
        assert stats.high_conf_size == 1
        np.testing.assert_allclose(stats.centroid, [2.0, 0.0])
        assert stats.centroid_norm == pytest.approx(2.0)


class TestCosine:
    def test_known_values(self):
        assert cosine_similarity([1.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0)
        assert cosine_similarity([1.0, 0.0], [0.0, 2.0]) == pytest.approx(0.0)
        assert cosine_similarity([-1.0, 0.0], [3.0, 0.0]) == pytest.approx(-1.0)

    def test_batch(self):
        out = cosine_similarity(np.array([[1.0, 1.0], [1.0, 0.0]]), [1.0, 0.0])
        np.testing.assert_allclose(out, [np.sqrt(0.5), 1.0])

    def test_zero_norm(self):
        with pytest.raises(ZeroNormError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(ZeroNormError):
            cosine_similarity([1.0, 0.0], [0.0, 0.0])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
           st.floats(0.01, 100.0))
    def test_scale_invariant_and_antisymmetric(self, f, scale):
        o = np.array([0.3, -1.0, 2.0])
        f = np.asarray(f)
        base = cosine_similarity(f, o)
        assert cosine_similarity(scale * f, o) == pytest.approx(base, abs=1e-9)
        assert cosine_similarity(-f, o) == pytest.approx(-base, abs=1e-9)
        assert -1.0 <= base <= 1.0


class TestPurity:
    def test_majority_share(self):
        assert purity([1, 1, 1, 2, 0]) == pytest.approx(0.6)

    def test_missing_truth(self):
        with pytest.raises(MissingTruthError):
            purity([1, None, 1])
        with pytest.raises(MissingTruthError):
            purity([1, -1])

    def test_empty(self):
        with pytest.raises(EmptyClassError):
            purity([])
