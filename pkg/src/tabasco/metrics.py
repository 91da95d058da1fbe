"""Prediction-space separation metrics.

All logarithms are base 2, so every JSD value lies in [0, 1]. Functions take a
single confidence vector of shape ``(M,)`` or a batch of shape ``(N, M)`` with
one observed label per row; batched calls return arrays, single calls return
floats. Inputs are assumed validated at ingestion; only numerical guards are
applied here.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_TINY = 1e-12


def _as_batch(probs, observed):
    p = np.asarray(probs, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    c = np.atleast_1d(np.asarray(observed, dtype=np.int64))
    if c.shape[0] != p.shape[0]:
        c = np.broadcast_to(c, (p.shape[0],))
    return p, c, single


def _unwrap(values, single):
    return float(values[0]) if single else values


def _xlog2_ratio(x, y):
    # x * log2(x / y) with 0 * log 0 := 0
    safe = np.log2(np.maximum(x, _TINY)) - np.log2(np.maximum(y, _TINY))
    return np.where(x > 0, x * safe, 0.0)


def jsd(probs, observed):
    """Jensen-Shannon divergence between predictions and the one-hot observed label."""
    p, c, single = _as_batch(probs, observed)
    y = np.zeros_like(p)
    y[np.arange(p.shape[0]), c] = 1.0
    m = 0.5 * (p + y)
    out = 0.5 * _xlog2_ratio(p, m).sum(axis=1) + 0.5 * _xlog2_ratio(y, m).sum(axis=1)
    return _unwrap(np.clip(out, 0.0, 1.0), single)


def jsd_closed_form(p_c):
    """JSD as a function of the observed-class confidence alone.

    Valid for one-hot labels: ``0.5 * (2 + u log u - (u + 1) log(u + 1))``.
    """
    u = np.asarray(p_c, dtype=np.float64)
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise ValidationError("observed-class confidence must lie in [0, 1]")
    ulogu = np.where(u > 0, u * np.log2(np.maximum(u, _TINY)), 0.0)
    out = 0.5 * (2.0 + ulogu - (u + 1.0) * np.log2(u + 1.0))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def weight(probs, observed, class_mean):
    """Confidence-ratio weight, capped by the same ratio on the class mean.

    ``min(max(p) / p[c], max(mean) / mean[c])``; always >= 1.
    """
    p, c, single = _as_batch(probs, observed)
    rows = np.arange(p.shape[0])
    own = np.maximum(p[rows, c], _TINY)
    ratio = p.max(axis=1) / own
    mean = np.atleast_2d(np.asarray(class_mean, dtype=np.float64))
    if mean.shape[0] == 1:
        mean = np.broadcast_to(mean, p.shape)
    cap = mean.max(axis=1) / np.maximum(mean[rows, c], _TINY)
    return _unwrap(np.maximum(np.minimum(ratio, cap), 1.0), single)


def wjsd(probs, observed, class_mean):
    """Weighted JSD: ``weight * jsd``."""
    w = weight(probs, observed, class_mean)
    return w * jsd(probs, observed)


def jsd_difference_bound(p_i_c, p_j_c):
    """Upper bound on ``|JSD_i - JSD_j|`` for samples of the same class.

    The derivative of the closed form is evaluated at the first argument, so the
    bound only holds when ``p_i_c <= p_j_c``; pass the smaller confidence first.
    """
    a = np.asarray(p_i_c, dtype=np.float64)
    b = np.asarray(p_j_c, dtype=np.float64)
    if np.any(a <= 0):
        raise ValidationError("bound diverges at zero confidence", code="domain")
    out = 0.5 * np.log2((a + 1.0) / a) * np.abs(a - b)
    return float(out) if out.ndim == 0 else out
