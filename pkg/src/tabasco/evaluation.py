"""Ground-truth scoring, single-metric baselines and purity analyses.

Baselines return :class:`SelectionOutcome` objects so that they go through the
very same scorer as the full selector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from . import metrics
from .centroids import class_mean_confidence, cosine_similarity, purity
from .errors import MissingTruthError, TabascoError, ValidationError
from .mixture import assign_clusters, fit_two_component, normalize_per_class
from .selection import (Branch, Dimension, SelectionConfig, SelectionOutcome, _median_split,
                        build_statistics_table, skipped_outcome)

GROUPS = ("head", "medium", "tail")
REPORT_COLUMNS = (
    "scope", "class", "group", "intrinsic_size", "n", "n_truly_clean", "noise_rate",
    "n_selected", "clean_ratio", "precision", "recall", "f1",
    "observed_purity", "high_conf_purity", "dimension", "branch",
)
PURITY_TABLE_COLUMNS = ("point", "purity", "best_clean_ratio", "noise_ratio", "class")


@dataclass
class SelectionReport:
    rows: list[dict]
    aggregates: list[dict]

    def row(self, class_index: int) -> dict:
        return next(r for r in self.rows if r["class"] == class_index)

    def aggregate(self, scope: str) -> dict:
        return next(a for a in self.aggregates if a["scope"] == scope)

    def group_rows(self, group: str) -> list[dict]:
        return [r for r in self.rows if r["group"] == group]

    def table(self) -> list[dict]:
        return [{"scope": "class", **r} for r in self.rows] + list(self.aggregates)


def class_groups(intrinsic_counts) -> dict[int, str]:
    """Equal-count head/medium/tail tertiles by intrinsic class size."""
    counts = np.asarray(intrinsic_counts)
    order = sorted(range(len(counts)), key=lambda c: (-counts[c], c))
    return {int(c): name for name, part in zip(GROUPS, np.array_split(order, 3)) for c in part}


def _f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def clean_ratio(ids, dataset) -> float:
    """Share of ``ids`` whose observed label equals the true label."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        return 0.0
    rows = np.searchsorted(dataset.ids, ids) if _sorted_ids(dataset) else _rows_for(dataset, ids)
    return float(np.mean(dataset.observed[rows] == dataset.true_labels[rows]))


def _sorted_ids(dataset):
    ids = dataset.ids
    return ids.size < 2 or bool(np.all(ids[1:] > ids[:-1]))


def _rows_for(dataset, ids):
    order = np.argsort(dataset.ids)
    return order[np.searchsorted(dataset.ids[order], ids)]


def score_selection(outcomes: dict, dataset) -> SelectionReport:
    if not dataset.has_truth:
        raise MissingTruthError("scoring needs a true label on every record")
    groups = class_groups(dataset.intrinsic_counts())
    intrinsic = dataset.intrinsic_counts()
    table = build_statistics_table(dataset)
    by_class = dataset.groups()
    rows = []
    for c in range(dataset.num_classes):
        oc = outcomes.get(c) or skipped_outcome(c)
        members = by_class.get(c, np.empty(0, dtype=np.int64))
        truth = dataset.true_labels[members]
        truly_clean = set(dataset.ids[members][truth == c].tolist())
        selected = oc.clean_ids.tolist()
        hits = sum(1 for i in selected if i in truly_clean)
        n = int(members.size)
        precision = hits / len(selected) if selected else 0.0
        recall = hits / len(truly_clean) if truly_clean else 0.0
        hc_purity = 0.0
        if c in table:
            hc_rows = members[np.isin(dataset.ids[members], table[c].high_conf_ids)]
            hc_purity = purity(dataset.true_labels[hc_rows].tolist())
        rows.append({
            "class": c,
            "group": groups[c],
            "intrinsic_size": intrinsic[c],
            "n": n,
            "n_truly_clean": len(truly_clean),
            "noise_rate": 1.0 - len(truly_clean) / n if n else 0.0,
            "n_selected": len(selected),
            "hits": hits,
            "clean_ratio": precision,
            "precision": precision,
            "recall": recall,
            "f1": _f1(precision, recall),
            "observed_purity": purity(truth.tolist()) if n else 0.0,
            "high_conf_purity": hc_purity,
            "dimension": oc.dimension.value,
            "branch": oc.branch.value,
        })
    return SelectionReport(rows, _aggregate(rows))


def _aggregate(rows) -> list[dict]:
    out = []
    scopes = [("macro", rows)] + [(g, [r for r in rows if r["group"] == g]) for g in GROUPS]
    for scope, part in scopes:
        live = [r for r in part if r["n"] > 0]
        if live:
            p = float(np.mean([r["precision"] for r in live]))
            rc = float(np.mean([r["recall"] for r in live]))
            f = float(np.mean([r["f1"] for r in live]))
            pur = float(np.mean([r["observed_purity"] for r in live]))
            hpur = float(np.mean([r["high_conf_purity"] for r in live]))
        else:
            p = rc = f = pur = hpur = 0.0
        out.append({"scope": scope, "n": sum(r["n"] for r in part), "precision": p, "clean_ratio": p,
                    "recall": rc, "f1": f, "observed_purity": pur, "high_conf_purity": hpur})
    hits = sum(r["hits"] for r in rows)
    sel = sum(r["n_selected"] for r in rows)
    clean = sum(r["n_truly_clean"] for r in rows)
    p = hits / sel if sel else 0.0
    rc = hits / clean if clean else 0.0
    out.append({"scope": "micro", "n": sum(r["n"] for r in rows), "precision": p, "clean_ratio": p,
                "recall": rc, "f1": _f1(p, rc)})
    return out


# --- baselines -------------------------------------------------------------

def baseline_small_jsd(class_index: int, ids, probs, class_mean=None,
                       config: SelectionConfig = SelectionConfig()) -> SelectionOutcome:
    """Small-value selection on plain JSD: the low-mean mixture component is clean."""
    ids = np.asarray(ids, dtype=np.int64)
    order = np.argsort(ids, kind="stable")
    ids, probs = ids[order], np.asarray(probs)[order]
    values = np.atleast_1d(metrics.jsd(probs, np.full(ids.size, class_index)))
    diag = {"n": int(ids.size)}
    if ids.size < config.min_class_size:
        clean, noisy = _median_split(ids, values)
        return SelectionOutcome(class_index, Dimension.JSD, Branch.SMALL, clean, noisy, diag)
    fit = fit_two_component(normalize_per_class(values), tol=config.em_tol, max_iter=config.em_max_iter)
    pair = assign_clusters(normalize_per_class(values), ids, fit)
    diag.update({"threshold_d": fit.threshold_d, "wjsd_mean_low": fit.means[0], "wjsd_mean_high": fit.means[1]})
    return SelectionOutcome(class_index, Dimension.JSD, Branch.BASELINE, pair.low_ids, pair.high_ids, diag,
                            wjsd_clusters=(pair.low_ids, pair.high_ids))


def baseline_naive_cd(features) -> np.ndarray:
    """Cosine similarity of each feature to the mean feature of the whole observed class."""
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if f.shape[0] == 0:
        raise ValidationError("naive centroid of an empty class")
    return np.atleast_1d(cosine_similarity(f, f.mean(axis=0)))


def naive_cd_partition(class_index: int, ids, features,
                       config: SelectionConfig = SelectionConfig()) -> SelectionOutcome:
    """The high-similarity mixture component on naive CD is clean."""
    ids = np.asarray(ids, dtype=np.int64)
    order = np.argsort(ids, kind="stable")
    ids, features = ids[order], np.asarray(features)[order]
    values = baseline_naive_cd(features)
    diag = {"n": int(ids.size)}
    if ids.size < config.min_class_size:
        clean, noisy = _median_split(ids, -values)
        return SelectionOutcome(class_index, Dimension.CD, Branch.SMALL, clean, noisy, diag)
    norm = normalize_per_class(values)
    fit = fit_two_component(norm, tol=config.em_tol, max_iter=config.em_max_iter)
    pair = assign_clusters(norm, ids, fit)
    diag.update({"acd_mean_far": fit.means[0], "acd_mean_near": fit.means[1]})
    return SelectionOutcome(class_index, Dimension.CD, Branch.BASELINE, pair.high_ids, pair.low_ids, diag,
                            acd_clusters=(pair.high_ids, pair.low_ids))


BASELINES = ("jsd-small", "naive-cd")


def run_baseline(dataset, strategy: str, config: SelectionConfig = SelectionConfig()) -> dict:
    if strategy not in BASELINES:
        raise ValidationError(f"unknown baseline strategy {strategy!r}; choose from {BASELINES}")
    if dataset.n == 0:
        raise ValidationError("cannot select on an empty dataset", code="empty_dataset")
    outcomes = {}
    groups = dataset.groups()
    for c in range(dataset.num_classes):
        rows = groups.get(c)
        if rows is None:
            outcomes[c] = skipped_outcome(c)
            continue
        ids = dataset.ids[rows]
        try:
            if strategy == "jsd-small":
                mean = class_mean_confidence(dataset.probs[rows])
                outcomes[c] = baseline_small_jsd(c, ids, dataset.probs[rows], mean, config)
            else:
                outcomes[c] = naive_cd_partition(c, ids, dataset.features[rows], config)
        except TabascoError as exc:
            clean, noisy = _median_split(np.sort(ids), np.zeros(ids.size))
            outcomes[c] = SelectionOutcome(c, Dimension.FALLBACK, Branch.FIT_FAILED, clean, noisy,
                                           {"n": int(ids.size), "warning": str(exc)})
    return outcomes


# --- diagnostics ------------------------------------------------------------

def histogram_overlap(a, b, bins: int = 50, value_range=None) -> float:
    """Overlap coefficient of two normalized histograms on a shared binning (1 = identical)."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return float("nan")
    if value_range is None:
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        value_range = (lo, hi if hi > lo else lo + 1.0)
    ha, _ = np.histogram(a, bins=bins, range=value_range)
    hb, _ = np.histogram(b, bins=bins, range=value_range)
    return float(np.minimum(ha / ha.sum(), hb / hb.sum()).sum())


def best_cluster_clean_ratio(outcome: SelectionOutcome, dataset) -> float:
    """Highest clean ratio among the clusters produced on either axis."""
    clusters = []
    for pair in (outcome.wjsd_clusters, outcome.acd_clusters):
        if pair is not None:
            clusters += [g for g in pair if len(g)]
    if not clusters:
        clusters = [g for g in (outcome.clean_ids, outcome.noisy_ids) if len(g)]
    return max(clean_ratio(g, dataset) for g in clusters)


def spearman(x, y) -> float:
    """Spearman rank correlation; NaN when fewer than three points or a constant input."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.size < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(sstats.spearmanr(x, y).statistic)


def purity_vs_cleanratio_table(points) -> tuple[list[dict], float]:
    """Rows of ``(purity, best_clean_ratio)`` plus their Spearman correlation.

    ``points`` yields ``(dataset, outcomes, class_index, noise_ratio)``; the
    purity is that of the observed class. The correlation is NaN (undefined) for
    fewer than three points.
    """
    rows = []
    for k, (dataset, outcomes, c, ratio) in enumerate(points):
        members = dataset.groups()[c]
        rows.append({
            "point": k,
            "purity": purity(dataset.true_labels[members].tolist()),
            "best_clean_ratio": best_cluster_clean_ratio(outcomes[c], dataset),
            "noise_ratio": ratio,
            "class": c,
        })
    rho = spearman([r["purity"] for r in rows], [r["best_clean_ratio"] for r in rows])
    return rows, rho


def undefined(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def centroid_purity_sweep(dataset, class_index: int, purities, seed: int = 0,
                          config: SelectionConfig = SelectionConfig()) -> list[dict]:
    """Separation quality as a function of how pure the centroid's source set is.

    For each target purity ``f`` (>= 0.5) a centroid is averaged from a random
    subset of the class holding a fraction ``f`` of truly clean samples. Every
    sample of the class is scored by cosine similarity to that centroid, split by
    the two-component mixture, and the better of the two clusters' clean ratios
    is reported. The subset size is the largest one every requested purity can
    be drawn at, so only the composition changes across points.
    """
    purities = [float(f) for f in purities]
    if any(not 0.5 <= f <= 1.0 for f in purities):
        raise ValidationError("centroid purities must lie in [0.5, 1]")
    if not dataset.has_truth:
        raise MissingTruthError("a purity sweep needs true labels")
    rows = dataset.groups().get(class_index)
    if rows is None:
        raise ValidationError(f"class {class_index} has no samples")
    rows = rows[np.argsort(dataset.ids[rows], kind="stable")]
    ids, features = dataset.ids[rows], dataset.features[rows]
    is_clean = dataset.true_labels[rows] == class_index
    clean_rows, noisy_rows = np.flatnonzero(is_clean), np.flatnonzero(~is_clean)
    worst = min(purities)
    size = int(clean_rows.size)
    if worst < 1.0:
        size = min(size, int(noisy_rows.size / (1.0 - worst)))
    if size < config.min_class_size:
        raise ValidationError(f"class {class_index} is too small or too clean for this sweep")
    rng = np.random.default_rng(seed)
    out = []
    for k, f in enumerate(purities):
        n_clean = int(round(f * size))
        chosen = np.concatenate([rng.choice(clean_rows, n_clean, replace=False),
                                 rng.choice(noisy_rows, size - n_clean, replace=False)])
        similarity = cosine_similarity(features, features[chosen].mean(axis=0))
        norm = normalize_per_class(similarity)
        pair = assign_clusters(norm, ids, fit_two_component(norm, tol=config.em_tol,
                                                             max_iter=config.em_max_iter))
        best = max(clean_ratio(g, dataset) for g in (pair.low_ids, pair.high_ids) if len(g))
        out.append({"point": k, "purity": purity(dataset.true_labels[rows[chosen]].tolist()),
                    "best_clean_ratio": best, "noise_ratio": float(np.mean(~is_clean)),
                    "class": class_index})
    return out


def outcomes_from_partition(assignments: dict, dataset, diagnostics: dict | None = None) -> dict:
    """Rebuild per-class outcomes from an ``id -> (class, is_clean)`` mapping.

    Every record of ``dataset`` must be assigned, to its own observed class.
    Dimension and branch come from ``diagnostics`` when given.
    """
    diagnostics = diagnostics or {}
    known = set(dataset.ids.tolist())
    extra = sorted(set(assignments) - known)
    if extra:
        raise ValidationError(f"partition names unknown ids, e.g. {extra[:5]}", code="bad_partition")
    groups = dataset.groups()
    out = {}
    for c in range(dataset.num_classes):
        ids = np.sort(dataset.ids[groups[c]]) if c in groups else np.empty(0, dtype=np.int64)
        clean, noisy = [], []
        for i in ids.tolist():
            if i not in assignments:
                raise ValidationError(f"partition misses record id {i}", code="bad_partition")
            cls, is_clean = assignments[i]
            if cls != c:
                raise ValidationError(f"record id {i} is assigned to class {cls} but observed as {c}",
                                      code="bad_partition")
            (clean if is_clean else noisy).append(i)
        row = diagnostics.get(c, {})
        dim = Dimension(row["dimension"]) if row.get("dimension") else Dimension.FALLBACK
        branch = Branch(row["branch"]) if row.get("branch") else Branch.SKIPPED
        out[c] = SelectionOutcome(c, dim, branch, np.asarray(clean, dtype=np.int64),
                                  np.asarray(noisy, dtype=np.int64), {"n": int(ids.size)})
    return out
