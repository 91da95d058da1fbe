import numpy as np
import pytest

from tabasco.centroids import cosine_similarity, purity
from tabasco.dataio import Dataset
from tabasco.errors import MissingTruthError, ValidationError
from tabasco.evaluation import (REPORT_COLUMNS, baseline_naive_cd, best_cluster_clean_ratio, centroid_purity_sweep,
                                class_groups, clean_ratio, histogram_overlap, outcomes_from_partition,
                                purity_vs_cleanratio_table, run_baseline, score_selection, spearman, undefined)
from tabasco.selection import Branch, Dimension, SelectionOutcome, build_statistics_table, select_all
from tabasco.simulator import SimulatorConfig, generate


def toy_dataset(observed, true_labels, m=2):
    n = len(observed)
    probs = np.full((n, m), 1.0 / m)
    feats = np.tile(np.eye(m)[0], (n, 1)) + 0.01 * np.arange(n)[:, None]
    return Dataset(np.arange(n, dtype=np.int64), np.asarray(observed), probs, feats,
                   np.asarray(true_labels), m)


def outcome(c, clean, noisy):
    return SelectionOutcome(c, Dimension.WJSD, Branch.A, np.asarray(clean, dtype=np.int64),
                            np.asarray(noisy, dtype=np.int64))


@pytest.fixture(scope="module")
def impure_asym():
    # seed 2 maps a head class onto a tail class, leaving several classes near 65% pure
    return generate(SimulatorConfig(max_class_size=1000, imbalance_factor=0.01, noise_type="asym", seed=2))


class TestScoring:
    def test_perfect_selection(self):
        ds = toy_dataset([0] * 6 + [1] * 4, [0, 0, 0, 0, 1, 1, 1, 1, 1, 0])
        outs = {0: outcome(0, [0, 1, 2, 3], [4, 5]), 1: outcome(1, [6, 7, 8], [9])}
        rep = score_selection(outs, ds)
        for c in (0, 1):
            assert rep.row(c)["precision"] == 1.0 and rep.row(c)["recall"] == 1.0
        assert rep.aggregate("micro")["f1"] == 1.0

    def test_partial_precision(self):
        # 10 selected, 8 truly clean
        truth = [0] * 8 + [1] * 2 + [0] * 2
        ds = toy_dataset([0] * 12, truth)
        rep = score_selection({0: outcome(0, list(range(10)), [10, 11])}, ds)
        row = rep.row(0)
        assert row["precision"] == pytest.approx(0.8)
        assert row["recall"] == pytest.approx(0.8)
        assert row["noise_rate"] == pytest.approx(2 / 12)

    def test_random_selection_matches_clean_share(self, rng):
        n = 5000
        truth = np.where(rng.random(n) < 0.4, 1, 0)
        ds = toy_dataset(np.zeros(n, dtype=int), truth)
        pick = rng.random(n) < 0.5
        rep = score_selection({0: outcome(0, np.flatnonzero(pick), np.flatnonzero(~pick))}, ds)
        assert rep.row(0)["precision"] == pytest.approx(0.6, abs=0.03)

    def test_missing_truth(self, small_sym):
        ds = small_sym.dataset.without_truth()
        with pytest.raises(MissingTruthError):
            score_selection(select_all(ds), ds)

    def test_report_table_columns(self, small_sym):
        rep = score_selection(select_all(small_sym.dataset), small_sym.dataset)
        assert set(rep.table()[0]) >= set(REPORT_COLUMNS)
        scopes = {a["scope"] for a in rep.aggregates}
        assert scopes == {"macro", "head", "medium", "tail", "micro"}

    def test_clean_ratio(self):
        ds = toy_dataset([0, 0, 0, 0], [0, 1, 0, 0])
        assert clean_ratio([0, 1], ds) == 0.5
        assert clean_ratio([], ds) == 0.0


class TestGroups:
    def test_tertiles_of_ten(self):
        groups = class_groups([5000, 3000, 2000, 1000, 800, 500, 300, 200, 100, 50])
        names = [groups[c] for c in range(10)]
        assert names == ["head"] * 4 + ["medium"] * 3 + ["tail"] * 3

    def test_order_follows_size_not_index(self):
        groups = class_groups([10, 1000, 100])
        assert groups == {1: "head", 2: "medium", 0: "tail"}


class TestBaselines:
    def test_noise_free_naive_cd_keeps_nearly_everything_clean(self):
        ds = generate(SimulatorConfig(max_class_size=300, noise_ratio=0.0, seed=4)).dataset
        rep = score_selection(run_baseline(ds, "naive-cd"), ds)
        assert rep.aggregate("macro")["precision"] == pytest.approx(1.0)

    def test_jsd_baseline_partitions(self, small_sym):
        ds = small_sym.dataset
        outs = run_baseline(ds, "jsd-small")
        for c, rows in ds.groups().items():
            np.testing.assert_array_equal(outs[c].ids, np.sort(ds.ids[rows]))
            assert outs[c].dimension is Dimension.JSD

    def test_unknown_strategy(self, small_sym):
        with pytest.raises(ValidationError):
            run_baseline(small_sym.dataset, "loss")

    def test_naive_centroid_blurs_impure_class(self, impure_asym):
        # an adaptive centroid separates clean from noisy features better than the class mean
        ds = impure_asym.dataset
        table = build_statistics_table(ds)
        worse = 0
        for c, rows in ds.groups().items():
            clean = ds.true_labels[rows] == c
            if purity(ds.true_labels[rows].tolist()) > 0.7:
                continue
            cd = baseline_naive_cd(ds.features[rows])
            acd = cosine_similarity(ds.features[rows], table[c].centroid)
            worse += histogram_overlap(cd[clean], cd[~clean]) > histogram_overlap(acd[clean], acd[~clean])
        assert worse >= 3


class TestOverlap:
    def test_identical_and_disjoint(self):
        a = np.linspace(0, 1, 100)
        assert histogram_overlap(a, a) == pytest.approx(1.0)
        assert histogram_overlap(a * 0.4, 0.6 + a * 0.4, bins=10) == pytest.approx(0.0)

    def test_empty_is_nan(self):
        assert np.isnan(histogram_overlap([], [1.0]))


class TestPurityTables:
    def test_spearman(self):
        assert spearman([1, 2, 3], [2, 4, 9]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        assert undefined(spearman([1, 2], [1, 2]))
        assert undefined(spearman([1, 1, 1], [1, 2, 3]))

    def test_table_with_two_points_has_no_correlation(self, small_sym, small_asym):
        pts = [(s.dataset, select_all(s.dataset), 9, 0.4) for s in (small_sym, small_asym)]
        rows, rho = purity_vs_cleanratio_table(pts)
        assert len(rows) == 2 and undefined(rho)
        for r in rows:
            assert 0 <= r["best_clean_ratio"] <= 1 and 0 < r["purity"] <= 1

    def test_best_cluster_is_max(self, small_asym):
        ds = small_asym.dataset
        o = select_all(ds)[0]
        groups = [g for pair in (o.wjsd_clusters, o.acd_clusters) for g in pair if len(g)]
        assert best_cluster_clean_ratio(o, ds) == max(clean_ratio(g, ds) for g in groups)

    def test_centroid_sweep(self, impure_asym):
        ds = impure_asym.dataset
        levels = [0.5, 0.7, 0.9, 1.0]
        rows = centroid_purity_sweep(ds, 7, levels, seed=0)
        # the subset is small here, so purities land within one sample of the target
        np.testing.assert_allclose([r["purity"] for r in rows], levels, atol=0.05)
        assert rows[-1]["best_clean_ratio"] >= rows[0]["best_clean_ratio"]
        assert rows == centroid_purity_sweep(ds, 7, levels, seed=0)

    def test_centroid_sweep_validation(self, impure_asym):
        ds = impure_asym.dataset
        with pytest.raises(ValidationError):
            centroid_purity_sweep(ds, 7, [0.3])
        with pytest.raises(MissingTruthError):
            centroid_purity_sweep(ds.without_truth(), 7, [0.5])


class TestPartitionRebuild:
    def test_round_trip(self, small_sym):
        ds = small_sym.dataset
        outs = select_all(ds)
        assign = {int(i): (c, True) for c, o in outs.items() for i in o.clean_ids}
        assign.update({int(i): (c, False) for c, o in outs.items() for i in o.noisy_ids})
        diag = {c: {"dimension": o.dimension.value, "branch": o.branch.value} for c, o in outs.items()}
        back = outcomes_from_partition(assign, ds, diag)
        assert all(back[c].same_partition(outs[c]) for c in outs)

    def test_rejects_bad_partitions(self):
        ds = toy_dataset([0, 0, 1], [0, 0, 1])
        good = {0: (0, True), 1: (0, False), 2: (1, True)}
        for bad in ({**good, 7: (0, True)}, {0: (0, True), 1: (0, False)}, {**good, 2: (0, True)}):
            with pytest.raises(ValidationError) as err:
                outcomes_from_partition(bad, ds)
            assert err.value.code == "bad_partition"
        out = outcomes_from_partition(good, ds)
        assert out[0].branch is Branch.SKIPPED and out[0].dimension is Dimension.FALLBACK
