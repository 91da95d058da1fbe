import numpy as np
import pytest

from tabasco.centroids import ClassStatistics
from tabasco.dataio import Dataset
from tabasco.errors import ValidationError
from tabasco.mixture import ClusterPair, MixtureFit
from tabasco.selection import (Branch, Dimension, SelectionConfig, centroid_partner, select_all,
                               select_class, select_cluster_acd, select_cluster_wjsd, select_dimension)


def fit_with_threshold(d):
    return MixtureFit(means=(0.2, 0.8), std_devs=(0.1, 0.1), weights=(0.5, 0.5), threshold_d=d,
                      log_likelihood=0.0, iterations=0)


def stats(c, centroid, high_size):
    return ClassStatistics(class_index=c, mean_confidence=np.full(2, 0.5), target_class=c, threshold=0.5,
                           high_conf_ids=np.arange(high_size), centroid=np.asarray(centroid, dtype=float),
                           size=high_size)


IDS = np.arange(4)
NEAR, FAR = np.array([0, 1]), np.array([2, 3])
ACD_PAIR = ClusterPair(low_ids=FAR, high_ids=NEAR)
WJSD_PAIR = ClusterPair(low_ids=np.array([0, 1]), high_ids=np.array([2, 3]))


class TestDimension:
    def test_branch_a(self):
        # near: mean 0.2, std 0.1; far: mean 0.8, std 0.03 -> ratio 0.3 < 0.6
        wn = np.array([0.1, 0.3, 0.77, 0.83])
        dim, branch, (g1, g2), s = select_dimension(IDS, wn, fit_with_threshold(0.5), WJSD_PAIR, ACD_PAIR, 0.6)
        assert (dim, branch) == (Dimension.WJSD, Branch.A)
        assert s["sigma_ratio"] == pytest.approx(0.3)
        np.testing.assert_array_equal(g1, [0, 1])

    def test_wide_far_cluster_goes_to_acd(self):
        wn = np.array([0.1, 0.3, 0.6, 1.0])  # far std 0.2 -> ratio 2
        dim, branch, (g1, g2), _ = select_dimension(IDS, wn, fit_with_threshold(0.5), WJSD_PAIR, ACD_PAIR, 0.6)
        assert (dim, branch) == (Dimension.ACD, Branch.C)
        np.testing.assert_array_equal(g1, NEAR)
        np.testing.assert_array_equal(g2, FAR)

    def test_branch_b(self):
        wn = np.array([0.6, 0.7, 0.8, 0.9])
        dim, branch, _, _ = select_dimension(IDS, wn, fit_with_threshold(0.5), WJSD_PAIR, ACD_PAIR, 0.6)
        assert (dim, branch) == (Dimension.WJSD, Branch.B)

    def test_empty_acd_cluster_keeps_wjsd(self):
        pair = ClusterPair(low_ids=np.empty(0, dtype=np.int64), high_ids=IDS)
        dim, branch, _, _ = select_dimension(IDS, np.linspace(0, 1, 4), fit_with_threshold(0.5),
                                             WJSD_PAIR, pair, 0.6)
        assert (dim, branch) == (Dimension.WJSD, Branch.ACD_EMPTY)


class TestClusterChoice:
    def test_lower_wjsd_is_clean(self):
        ids = np.arange(4)
        clean, noisy = select_cluster_wjsd([2, 3], [0, 1], ids, [0.7, 0.7, 0.2, 0.2])
        np.testing.assert_array_equal(clean, [2, 3])
        np.testing.assert_array_equal(noisy, [0, 1])

    def test_equal_means_prefer_larger_cluster(self):
        ids = np.arange(13)
        g1, g2 = np.arange(10), np.arange(10, 13)
        clean, _ = select_cluster_wjsd(g2, g1, ids, np.full(13, 0.4))
        np.testing.assert_array_equal(clean, g1)

    def test_partner_flips_acd_choice(self):
        table = {0: stats(0, [1.0, 0.0], 3), 1: stats(1, [0.99, 0.14], 40)}
        assert centroid_partner(table[0], table, 0.05) == 1
        clean, noisy, partner = select_cluster_acd([1, 2], [3, 4], table[0], table, 0.05)
        assert partner == 1
        np.testing.assert_array_equal(clean, [3, 4])

    def test_no_partner_keeps_near(self):
        # the bigger class points elsewhere; the similar one is smaller
        table = {0: stats(0, [1.0, 0.0], 10), 1: stats(1, [0.0, 1.0], 40), 2: stats(2, [1.0, 0.01], 5)}
        assert centroid_partner(table[0], table, 0.05) is None
        clean, _, _ = select_cluster_acd([1, 2], [3, 4], table[0], table, 0.05)
        np.testing.assert_array_equal(clean, [1, 2])


class TestSelectClass:
    def test_small_class_median_split(self):
        probs = np.array([[0.9, 0.1], [0.3, 0.7]])
        table = {0: ClassStatistics(0, probs.mean(axis=0), 0, 0.6, np.array([4]), np.array([1.0, 0.0]), 2)}
        out = select_class(0, [4, 7], probs, np.eye(2), table)
        assert (out.dimension, out.branch) == (Dimension.FALLBACK, Branch.SMALL)
        np.testing.assert_array_equal(out.clean_ids, [4])
        np.testing.assert_array_equal(out.noisy_ids, [7])

    def test_empty_class_rejected(self):
        with pytest.raises(ValidationError):
            select_class(0, [], np.empty((0, 2)), np.empty((0, 2)), {})

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            SelectionConfig(eta=0.0)
        with pytest.raises(ValidationError):
            SelectionConfig(epsilon=1.0)


class TestSelectAll:
    def test_partition_covers_every_sample_once(self, small_sym):
        ds = small_sym.dataset
        outcomes = select_all(ds)
        for c, rows in ds.groups().items():
            o = outcomes[c]
            assert np.intersect1d(o.clean_ids, o.noisy_ids).size == 0
            np.testing.assert_array_equal(o.ids, np.sort(ds.ids[rows]))

    def test_deterministic_across_threads(self, small_asym):
        ds = small_asym.dataset
        a = select_all(ds, SelectionConfig(threads=1))
        b = select_all(ds, SelectionConfig(threads=4))
        assert all(a[c].same_partition(b[c]) for c in a)

    def test_shuffle_invariant(self, small_sym):
        ds = small_sym.dataset
        perm = np.random.default_rng(5).permutation(ds.n)
        a, b = select_all(ds), select_all(ds.take(perm))
        assert all(a[c].same_partition(b[c]) for c in a)

    def test_missing_class_is_skipped(self, small_sym):
        ds = small_sym.dataset
        keep = np.flatnonzero(ds.observed != 3)
        out = select_all(ds.take(keep))
        assert out[3].branch is Branch.SKIPPED
        assert out[3].clean_ids.size == 0 and out[3].noisy_ids.size == 0

    def test_empty_dataset(self):
        empty = Dataset(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty((0, 2)),
                        np.empty((0, 2)), np.empty(0, dtype=np.int64), 2)
        with pytest.raises(ValidationError) as err:
            select_all(empty)
        assert err.value.code == "empty_dataset"
