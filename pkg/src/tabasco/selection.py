"""Two-stage bi-dimensional sample selection.

For every observed class the samples are placed in a (WJSD, ACD) plane, each
axis is min-max normalized and split by a two-component mixture, one axis is
chosen by the dimension rule, and one of its clusters is declared clean.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import metrics
from .centroids import ClassStatistics, build_class_statistics, cosine_similarity
from .errors import TabascoError, ValidationError
from .mixture import ClusterPair, MixtureFit, assign_clusters, fit_two_component, normalize_per_class

log = logging.getLogger(__name__)


class Dimension(str, Enum):
    WJSD = "WJSD"
    ACD = "ACD"
    FALLBACK = "FALLBACK"
    # single-metric baselines share the outcome schema
    JSD = "JSD"
    CD = "CD"


class Branch(str, Enum):
    A = "A"  # mu1 < d < mu2 and sigma2/sigma1 < eta
    B = "B"  # mu1 > d and mu2 > d
    C = "C"  # otherwise: ACD clusters
    ACD_EMPTY = "ACD_EMPTY"  # an ACD cluster came back empty, WJSD kept
    SMALL = "SMALL"
    FIT_FAILED = "FIT_FAILED"
    SKIPPED = "SKIPPED"
    BASELINE = "BASELINE"


@dataclass(frozen=True)
class SelectionConfig:
    eta: float = 0.6
    epsilon: float = 0.05
    min_class_size: int = 4
    em_tol: float = 1e-6
    em_max_iter: int = 100
    threads: int | None = None

    def __post_init__(self):
        if not 0 < self.eta <= 2:
            raise ValidationError(f"eta must lie in (0, 2], got {self.eta}")
        if not 0 < self.epsilon < 1:
            raise ValidationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.min_class_size < 4:
            raise ValidationError("min_class_size below 4 leaves too few points for a mixture fit")

    def as_dict(self) -> dict:
        return {
            "eta": self.eta,
            "epsilon": self.epsilon,
            "min_class_size": self.min_class_size,
            "em_tol": self.em_tol,
            "em_max_iter": self.em_max_iter,
        }


@dataclass(frozen=True)
class MetricPoint:
    sample_id: int
    wjsd: float
    acd: float
    wjsd_norm: float
    acd_norm: float


@dataclass(eq=False)
class SelectionOutcome:
    class_index: int
    dimension: Dimension
    branch: Branch
    clean_ids: np.ndarray
    noisy_ids: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    # (G1, G2) per axis: WJSD low-first, ACD near-centroid-first
    wjsd_clusters: tuple[np.ndarray, np.ndarray] | None = None
    acd_clusters: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def ids(self) -> np.ndarray:
        return np.sort(np.concatenate([self.clean_ids, self.noisy_ids]))

    def same_partition(self, other: "SelectionOutcome") -> bool:
        return (self.class_index == other.class_index
                and self.dimension == other.dimension
                and self.branch == other.branch
                and np.array_equal(self.clean_ids, other.clean_ids)
                and np.array_equal(self.noisy_ids, other.noisy_ids))


def _ids(a) -> np.ndarray:
    return np.sort(np.asarray(a, dtype=np.int64))


def class_metrics(probs, observed_class: int, features, stats: ClassStatistics):
    """Raw WJSD and ACD arrays for one class, aligned with its rows."""
    wjsd = metrics.wjsd(probs, np.full(len(probs), observed_class), stats.mean_confidence)
    acd = cosine_similarity(features, stats.centroid)
    return np.atleast_1d(wjsd), np.atleast_1d(acd)


def compute_metric_points(ids, probs, features, stats: ClassStatistics) -> list[MetricPoint]:
    wjsd, acd = class_metrics(probs, stats.class_index, features, stats)
    wn, an = normalize_per_class(wjsd), normalize_per_class(acd)
    return [MetricPoint(int(i), float(w), float(a), float(x), float(y))
            for i, w, a, x, y in zip(ids, wjsd, acd, wn, an)]


def _values_for(ids, all_ids, values):
    return values[np.isin(all_ids, ids)]


def _mean_std(v):
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std())


def select_dimension(ids, wjsd_norm, wjsd_fit: MixtureFit, wjsd_clusters: ClusterPair,
                     acd_clusters: ClusterPair, eta: float):
    """Pick the separation axis from the WJSD statistics of the two ACD clusters.

    ``acd_clusters.high_ids`` is the near-centroid cluster (G1). Returns
    ``(dimension, branch, (G1, G2), stats)``.
    """
    ids = np.asarray(ids, dtype=np.int64)
    wjsd_norm = np.asarray(wjsd_norm, dtype=np.float64)
    near, far = acd_clusters.high_ids, acd_clusters.low_ids
    d = wjsd_fit.threshold_d
    mu1, sigma1 = _mean_std(_values_for(near, ids, wjsd_norm))
    mu2, sigma2 = _mean_std(_values_for(far, ids, wjsd_norm))
    ratio = sigma2 / sigma1 if sigma1 > 0 else float("inf")
    stats = {"threshold_d": d, "mu1": mu1, "mu2": mu2, "sigma1": sigma1, "sigma2": sigma2,
             "sigma_ratio": ratio}
    wjsd_pair = (wjsd_clusters.low_ids, wjsd_clusters.high_ids)
    if near.size == 0 or far.size == 0:
        return Dimension.WJSD, Branch.ACD_EMPTY, wjsd_pair, stats
    if mu1 < d < mu2 and ratio < eta:
        return Dimension.WJSD, Branch.A, wjsd_pair, stats
    if mu1 > d and mu2 > d:
        return Dimension.WJSD, Branch.B, wjsd_pair, stats
    return Dimension.ACD, Branch.C, (near, far), stats


def select_cluster_wjsd(g1, g2, ids, wjsd):
    """The cluster with the smaller mean WJSD is clean; returns ``(clean, noisy)``.

    Ties go to the larger cluster, then to ``g1``.
    """
    g1, g2 = _ids(g1), _ids(g2)
    if g1.size == 0 or g2.size == 0:
        return (g1, g2) if g1.size else (g2, g1)
    ids = np.asarray(ids, dtype=np.int64)
    wjsd = np.asarray(wjsd, dtype=np.float64)
    m1 = _values_for(g1, ids, wjsd).mean()
    m2 = _values_for(g2, ids, wjsd).mean()
    if m1 < m2:
        return g1, g2
    if m2 < m1:
        return g2, g1
    return (g2, g1) if g2.size > g1.size else (g1, g2)


def centroid_partner(stats: ClassStatistics, all_stats: dict[int, ClassStatistics], epsilon: float):
    """First other class whose centroid points the same way and whose
    high-confidence set is larger, or ``None``."""
    if stats.centroid_norm <= 0:
        return None
    for k in sorted(all_stats):
        other = all_stats[k]
        if k == stats.class_index or other.centroid_norm <= 0:
            continue
        cos = cosine_similarity(stats.centroid, other.centroid)
        if abs(cos - 1.0) < epsilon and stats.high_conf_size < other.high_conf_size:
            return k
    return None


def select_cluster_acd(near, far, stats: ClassStatistics, all_stats: dict[int, ClassStatistics],
                       epsilon: float):
    """Near-centroid cluster is clean unless the centroid looks borrowed from a
    bigger class, in which case the far cluster is. Returns ``(clean, noisy, partner)``."""
    partner = centroid_partner(stats, all_stats, epsilon)
    near, far = _ids(near), _ids(far)
    if partner is None:
        return near, far, None
    return far, near, partner


def _median_split(ids, wjsd):
    order = np.lexsort((ids, wjsd))
    keep = (len(ids) + 1) // 2
    return _ids(ids[order[:keep]]), _ids(ids[order[keep:]])


def _fallback(class_index, ids, wjsd, branch, diagnostics):
    clean, noisy = _median_split(ids, wjsd)
    return SelectionOutcome(class_index, Dimension.FALLBACK, branch, clean, noisy, diagnostics)


def select_class(class_index: int, ids, probs, features, all_stats: dict[int, ClassStatistics],
                 config: SelectionConfig = SelectionConfig()) -> SelectionOutcome:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValidationError(f"class {class_index} has no samples")
    order = np.argsort(ids, kind="stable")
    ids, probs, features = ids[order], np.asarray(probs)[order], np.asarray(features)[order]
    stats = all_stats[class_index]
    diag = {"n": int(ids.size), "target_class": stats.target_class,
            "high_conf_size": stats.high_conf_size, "threshold_h": stats.threshold}

    wjsd = np.atleast_1d(metrics.wjsd(probs, np.full(ids.size, class_index), stats.mean_confidence))
    if ids.size < config.min_class_size:
        return _fallback(class_index, ids, wjsd, Branch.SMALL, diag)
    try:
        acd = np.atleast_1d(cosine_similarity(features, stats.centroid))
        wn, an = normalize_per_class(wjsd), normalize_per_class(acd)
        wfit = fit_two_component(wn, tol=config.em_tol, max_iter=config.em_max_iter)
        afit = fit_two_component(an, tol=config.em_tol, max_iter=config.em_max_iter)
    except TabascoError as exc:
        log.warning("class %d: falling back to a median split (%s)", class_index, exc)
        diag["warning"] = str(exc)
        return _fallback(class_index, ids, wjsd, Branch.FIT_FAILED, diag)

    wpair = assign_clusters(wn, ids, wfit)
    apair = assign_clusters(an, ids, afit)
    dimension, branch, (g1, g2), dstats = select_dimension(ids, wn, wfit, wpair, apair, config.eta)
    diag.update({
        "wjsd_mean_low": wfit.means[0], "wjsd_mean_high": wfit.means[1],
        "wjsd_var_low": wfit.variances[0], "wjsd_var_high": wfit.variances[1],
        "acd_mean_far": afit.means[0], "acd_mean_near": afit.means[1],
        "acd_var_far": afit.variances[0], "acd_var_near": afit.variances[1],
        **dstats,
    })
    partner = None
    if dimension is Dimension.WJSD:
        clean, noisy = select_cluster_wjsd(g1, g2, ids, wn)
    else:
        clean, noisy, partner = select_cluster_acd(g1, g2, stats, all_stats, config.epsilon)
    diag["partner_class"] = -1 if partner is None else int(partner)
    return SelectionOutcome(
        class_index, dimension, branch, clean, noisy, diag,
        wjsd_clusters=(wpair.low_ids, wpair.high_ids),
        acd_clusters=(apair.high_ids, apair.low_ids),
    )


def build_statistics_table(dataset) -> dict[int, ClassStatistics]:
    table = {}
    for c, rows in dataset.groups().items():
        table[c] = build_class_statistics(c, dataset.ids[rows], dataset.probs[rows], dataset.features[rows])
    return table


def skipped_outcome(class_index: int) -> SelectionOutcome:
    empty = np.empty(0, dtype=np.int64)
    return SelectionOutcome(class_index, Dimension.FALLBACK, Branch.SKIPPED, empty, empty.copy(),
                            {"n": 0, "warning": "no samples carry this observed label"})


def select_all(dataset, config: SelectionConfig = SelectionConfig()) -> dict[int, SelectionOutcome]:
    """Run per-class selection over every observed class of ``dataset``."""
    if dataset.n == 0:
        raise ValidationError("cannot select on an empty dataset", code="empty_dataset")
    groups = dataset.groups()
    table = build_statistics_table(dataset)

    def run(c):
        rows = groups[c]
        return select_class(c, dataset.ids[rows], dataset.probs[rows], dataset.features[rows], table, config)

    threads = config.threads or os.cpu_count() or 1
    classes = sorted(groups)
    if threads > 1 and len(classes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(classes, pool.map(run, classes)))
    else:
        results = {c: run(c) for c in classes}

    outcomes = {}
    for c in range(dataset.num_classes):
        if c in results:
            outcomes[c] = results[c]
        else:
            log.warning("class %d has no samples; skipped", c)
            outcomes[c] = skipped_outcome(c)
    return outcomes
