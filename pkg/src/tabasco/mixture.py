"""Two-component univariate Gaussian mixture fitted by EM.

Initialization is deterministic (10th/90th percentiles, equal weights, shared
sample variance), so identical input always produces an identical fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewSamplesError

VARIANCE_FLOOR = 1e-6
MIN_SAMPLES = 4
_TIE_TOL = 1e-12
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class MixtureFit:
    means: tuple[float, float]
    std_devs: tuple[float, float]
    weights: tuple[float, float]
    threshold_d: float
    log_likelihood: float
    iterations: int
    history: tuple[float, ...] = ()
    responsibilities: np.ndarray = field(default_factory=lambda: np.empty((0, 2)), repr=False)

    @property
    def variances(self) -> tuple[float, float]:
        return (self.std_devs[0] ** 2, self.std_devs[1] ** 2)


@dataclass(frozen=True, eq=False)
class ClusterPair:
    low_ids: np.ndarray
    high_ids: np.ndarray


def normalize_per_class(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant list maps to 0.5 everywhere."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi - lo <= 0:
        return np.full_like(v, 0.5)
    return (v - lo) / (hi - lo)


def _component_log_density(x, means, variances, weights):
    x = np.asarray(x, dtype=np.float64)[:, None]
    m = np.asarray(means)[None, :]
    v = np.asarray(variances)[None, :]
    return np.log(np.asarray(weights))[None, :] - 0.5 * (_LOG_2PI + np.log(v) + (x - m) ** 2 / v)


def _logsumexp(a):
    top = a.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(a - top).sum(axis=1, keepdims=True)))[:, 0]


def responsibilities(values, means, variances, weights) -> np.ndarray:
    logp = _component_log_density(values, means, variances, weights)
    return np.exp(logp - _logsumexp(logp)[:, None])


def fit_two_component(values, *, tol: float = 1e-6, max_iter: int = 100,
                      variance_floor: float = VARIANCE_FLOOR) -> MixtureFit:
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.shape[0] < MIN_SAMPLES:
        raise TooFewSamplesError(f"need at least {MIN_SAMPLES} values to fit a mixture, got {x.shape[0]}")

    means = np.percentile(x, [10.0, 90.0])
    variances = np.full(2, max(float(x.var()), variance_floor))
    weights = np.array([0.5, 0.5])

    history = []
    iterations = 0
    converged = False
    for _ in range(max_iter):
        logp = _component_log_density(x, means, variances, weights)
        norm = _logsumexp(logp)
        ll = float(norm.sum())
        if history and ll - history[-1] < tol:
            history.append(ll)
            converged = True
            break
        history.append(ll)
        resp = np.exp(logp - norm[:, None])
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = np.clip(nk / x.shape[0], 1e-12, None)
        weights = weights / weights.sum()
        means = (resp * x[:, None]).sum(axis=0) / nk
        variances = np.maximum((resp * (x[:, None] - means) ** 2).sum(axis=0) / nk, variance_floor)
        iterations += 1
    if not converged:
        logp = _component_log_density(x, means, variances, weights)
        history.append(float(_logsumexp(logp).sum()))

    order = np.argsort(means, kind="stable")
    means, variances, weights = means[order], variances[order], weights[order]
    resp = responsibilities(x, means, variances, weights)
    partial = MixtureFit(
        means=(float(means[0]), float(means[1])),
        std_devs=(float(np.sqrt(variances[0])), float(np.sqrt(variances[1]))),
        weights=(float(weights[0]), float(weights[1])),
        threshold_d=float("nan"),
        log_likelihood=history[-1],
        iterations=iterations,
        history=tuple(history),
        responsibilities=resp,
    )
    return MixtureFit(**{**partial.__dict__, "threshold_d": separation_threshold(partial)})


def separation_threshold(fit: MixtureFit) -> float:
    """Point between the means where both weighted component densities are equal.

    Falls back to the midpoint of the means if no crossing lies between them.
    """
    m0, m1 = fit.means
    v0, v1 = fit.variances
    w0, w1 = fit.weights
    mid = 0.5 * (m0 + m1)
    if m1 - m0 <= 0:
        return mid
    # log(w0 N0(x)) - log(w1 N1(x)) = a x^2 + b x + c
    a = 0.5 / v1 - 0.5 / v0
    b = m0 / v0 - m1 / v1
    c = (m1 ** 2 / (2 * v1) - m0 ** 2 / (2 * v0)
         + np.log(w0) - np.log(w1) - 0.5 * np.log(v0) + 0.5 * np.log(v1))
    if abs(a) < 1e-12 * max(abs(b), 1.0):
        roots = [] if b == 0 else [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            roots = []
        else:
            sq = np.sqrt(disc)
            # numerically stable pair
            q = -0.5 * (b + np.copysign(sq, b))
            roots = [q / a, c / q] if q != 0 else [-b / (2 * a)]
    inside = [float(r) for r in roots if np.isfinite(r) and m0 <= r <= m1]
    if not inside:
        return mid
    return min(inside, key=lambda r: abs(r - mid))


def high_component_mask(values, fit: MixtureFit) -> np.ndarray:
    """True where a value belongs to the high-mean component.

    Between the means the larger weighted density wins (ties go low); below the
    low mean everything is low and above the high mean everything is high, so the
    split stays monotone even when the component variances differ.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    logp = _component_log_density(x, fit.means, fit.variances, fit.weights)
    gap = logp[:, 1] - logp[:, 0]
    high = gap > _TIE_TOL * np.maximum(1.0, np.abs(logp).max(axis=1))
    high[x < fit.means[0]] = False
    high[x > fit.means[1]] = True
    return high


def assign_clusters(values, ids, fit: MixtureFit) -> ClusterPair:
    ids = np.asarray(ids, dtype=np.int64)
    high = high_component_mask(values, fit)
    return ClusterPair(low_ids=np.sort(ids[~high]), high_ids=np.sort(ids[high]))
