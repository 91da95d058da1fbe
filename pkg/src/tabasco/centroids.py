"""Per-class statistics: mean confidence, high-confidence set, adaptive centroid.

Arrays for one observed class are passed in aligned form: ``ids`` of shape
``(n,)``, ``probs`` of shape ``(n, M)`` and ``features`` of shape ``(n, F)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfidenceError, EmptyClassError, MissingTruthError, ZeroNormError

_TINY = 1e-12


@dataclass(frozen=True)
class ClassStatistics:
    class_index: int
    mean_confidence: np.ndarray
    target_class: int
    threshold: float
    high_conf_ids: np.ndarray
    centroid: np.ndarray
    size: int

    @property
    def high_conf_size(self) -> int:
        return int(self.high_conf_ids.shape[0])

    @property
    def centroid_norm(self) -> float:
        return float(np.linalg.norm(self.centroid))


def class_mean_confidence(probs) -> np.ndarray:
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if p.shape[0] == 0 or p.size == 0:
        raise EmptyClassError("cannot average confidences of an empty class")
    return p.mean(axis=0)


def target_class(mean_confidence) -> int:
    """Index of the largest mean confidence; ties go to the smallest index."""
    return int(np.argmax(np.asarray(mean_confidence)))


def confidence_threshold(probs, t_c: int, mean_confidence) -> float:
    """Weighted mean of the target-class confidence.

    Each sample is weighted by ``max(1, p[t_c] / mean[t_c])``, so the threshold
    never falls below the plain mean.
    """
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if p.shape[0] == 0:
        raise EmptyClassError("cannot threshold an empty class")
    ref = float(np.asarray(mean_confidence)[t_c])
    if ref <= 0:
        raise DegenerateConfidenceError(f"mean confidence of target class {t_c} is zero")
    conf = p[:, t_c]
    w = np.maximum(1.0, conf / ref)
    return float(np.sum(w * conf) / conf.shape[0])


def high_confidence_set(ids, probs, t_c: int, threshold: float) -> np.ndarray:
    """Ids whose target-class confidence is strictly above ``threshold``.

    When nothing clears the threshold the single most confident sample is
    returned (smallest id on ties) so that a centroid always exists.
    """
    ids = np.asarray(ids, dtype=np.int64)
    conf = np.atleast_2d(np.asarray(probs, dtype=np.float64))[:, t_c]
    chosen = ids[conf > threshold]
    if chosen.size == 0 and ids.size:
        best = conf.max()
        chosen = np.array([ids[conf == best].min()], dtype=np.int64)
    return np.sort(chosen)


def adaptive_centroid(ids, features, high_conf_ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    members = np.isin(ids, np.asarray(high_conf_ids, dtype=np.int64))
    if not members.any():
        raise RuntimeError("adaptive centroid requested for an empty high-confidence set")
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))[members]
    return f.mean(axis=0)


def cosine_similarity(features, centroid):
    """Cosine similarity of one feature (or each row of a batch) to ``centroid``."""
    f = np.asarray(features, dtype=np.float64)
    o = np.asarray(centroid, dtype=np.float64)
    o_norm = np.linalg.norm(o)
    f_norm = np.linalg.norm(f, axis=-1)
    if o_norm <= _TINY or np.any(f_norm <= _TINY):
        raise ZeroNormError("cosine similarity is undefined for a zero-norm vector")
    out = np.clip((f @ o) / (f_norm * o_norm), -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


acd = cosine_similarity


def purity(true_labels) -> float:
    """Share of the most common true class within a set of samples."""
    labels = [None if t is None else int(t) for t in true_labels]
    if not labels:
        raise EmptyClassError("purity of an empty set is undefined")
    if any(t is None or t < 0 for t in labels):
        raise MissingTruthError("purity needs a ground-truth label on every record")
    counts = np.bincount(np.asarray(labels, dtype=np.int64))
    return float(counts.max() / len(labels))


def build_class_statistics(class_index: int, ids, probs, features) -> ClassStatistics:
    ids = np.asarray(ids, dtype=np.int64)
    mean = class_mean_confidence(probs)
    t_c = target_class(mean)
    h_c = confidence_threshold(probs, t_c, mean)
    high = high_confidence_set(ids, probs, t_c, h_c)
    centroid = adaptive_centroid(ids, features, high)
    return ClassStatistics(
        class_index=int(class_index),
        mean_confidence=mean,
        target_class=t_c,
        threshold=h_c,
        high_conf_ids=high,
        centroid=centroid,
        size=int(ids.shape[0]),
    )
