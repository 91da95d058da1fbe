"""Synthetic noisy-labeled, intrinsically long-tailed datasets with ground truth.

Class sizes decay exponentially first; label noise is injected second. Model
outputs are then synthesized in place of a trained network:

* every class gets a unit prototype on the feature sphere, a blend of a private
  axis and a shared low-rank direction, so some class pairs look alike;
* a feature is its true-class prototype plus a random offset whose length grows
  with per-sample difficulty and with the rarity of the true class;
* confidences are a softmax over prototype similarities at ``temperature``,
  shifted toward frequent observed labels;
* memorization. Labels the network can fit are pulled into the confidences:
  the vector is blended toward the observed one-hot. Consistent flips
  (asymmetric noise) are nearly as learnable as clean labels. Scattered flips
  (symmetric noise) are not, and they are absorbed in feature space instead:
  the feature drifts toward the observed class's prototype.

Every knob other than class counts, noise and seed (``model_quality``,
``temperature``, ``memorization``, ``flip_memorization``, ``feature_drift``,
``prior_bias``, ``tail_difficulty``, ``difficulty_range``) is a property of this
stand-in, not of any real model. Quality 1 switches off all of the
memorization effects.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .dataio import Dataset
from .errors import ValidationError

NOISE_TYPES = ("symmetric", "asymmetric")


@dataclass(frozen=True)
class SimulatorConfig:
    num_classes: int = 10
    max_class_size: int = 5000
    imbalance_factor: float = 0.1
    noise_type: str = "symmetric"
    noise_ratio: float = 0.4
    feature_dim: int = 64
    model_quality: float = 0.2
    temperature: float = 0.1
    memorization: float = 2.0
    flip_memorization: float = 0.7
    feature_drift: float = 1.0
    prior_bias: float = 1.0
    tail_difficulty: float = 0.5
    difficulty_range: tuple = (0.1, 1.5)
    seed: int = 0

    def __post_init__(self):
        if self.noise_type in ("sym", "asym"):
            object.__setattr__(self, "noise_type", {"sym": "symmetric", "asym": "asymmetric"}[self.noise_type])
        if self.noise_type not in NOISE_TYPES:
            raise ValidationError(f"unknown noise type {self.noise_type!r}")
        if self.num_classes < 2:
            raise ValidationError("need at least two classes")
        if self.max_class_size < self.num_classes:
            raise ValidationError("max_class_size must be at least num_classes")
        if not 0 < self.imbalance_factor <= 1:
            raise ValidationError("imbalance_factor must lie in (0, 1]")
        if not 0 <= self.noise_ratio < 1:
            raise ValidationError("noise_ratio must lie in [0, 1)")
        if self.noise_type == "asymmetric" and self.noise_ratio >= 0.5:
            raise ValidationError("asymmetric noise_ratio must stay below 0.5")
        if self.feature_dim < 2:
            raise ValidationError("feature_dim must be at least 2")
        if not 0 <= self.model_quality <= 1:
            raise ValidationError("model_quality must lie in [0, 1]")
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")
        for name in ("memorization", "flip_memorization", "feature_drift", "prior_bias", "tail_difficulty"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        lo, hi = self.difficulty_range
        if not 0 <= lo <= hi:
            raise ValidationError("difficulty_range must be an ordered pair of non-negative numbers")
        object.__setattr__(self, "difficulty_range", (float(lo), float(hi)))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class SyntheticDataset:
    dataset: Dataset
    config: SimulatorConfig
    intrinsic_counts: list[int]
    transition_matrix: np.ndarray
    prototypes: np.ndarray = field(repr=False)

    @property
    def records(self):
        return list(self.dataset.records())

    def manifest_extra(self) -> dict:
        return {
            "intrinsic_counts": list(self.intrinsic_counts),
            "transition_matrix": self.transition_matrix.tolist(),
            "generator": self.config.as_dict(),
            "seed": self.config.seed,
        }


def longtail_counts(num_classes: int, max_class_size: int, imbalance_factor: float) -> list[int]:
    """Exponentially decaying class sizes from ``max_class_size`` down to
    ``max_class_size * imbalance_factor``."""
    if num_classes < 2 or max_class_size < num_classes or not 0 < imbalance_factor <= 1:
        raise ValidationError("need num_classes >= 2, max_class_size >= num_classes, 0 < factor <= 1")
    exps = np.arange(num_classes) / (num_classes - 1)
    counts = [int(round(max_class_size * imbalance_factor ** e)) for e in exps]
    return [max(c, 1) for c in counts]


def realized_transition(true_labels, observed, num_classes: int) -> np.ndarray:
    t = np.zeros((num_classes, num_classes))
    np.add.at(t, (np.asarray(true_labels), np.asarray(observed)), 1.0)
    rows = t.sum(axis=1, keepdims=True)
    return np.divide(t, rows, out=np.eye(num_classes), where=rows > 0)


def inject_symmetric_noise(true_labels, noise_ratio: float, rng: np.random.Generator,
                           num_classes: int | None = None) -> np.ndarray:
    """Flip exactly ``round(N * ratio)`` uniformly chosen samples to a uniformly
    chosen different class."""
    y = np.asarray(true_labels, dtype=np.int64)
    m = num_classes if num_classes is not None else int(y.max()) + 1
    if not 0 <= noise_ratio < 1:
        raise ValidationError("noise_ratio must lie in [0, 1)")
    n_flip = int(round(y.shape[0] * noise_ratio))
    observed = y.copy()
    chosen = rng.choice(y.shape[0], size=n_flip, replace=False)
    shift = rng.integers(0, m - 1, size=n_flip)
    new = shift + (shift >= y[chosen])
    observed[chosen] = new
    return observed


def random_derangement(num_classes: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        perm = rng.permutation(num_classes)
        if not np.any(perm == np.arange(num_classes)):
            return perm


def inject_asymmetric_noise(true_labels, noise_ratio: float, rng: np.random.Generator,
                            num_classes: int | None = None):
    """Flip ``round(n_c * ratio)`` samples of every class ``c`` to ``perm[c]``,
    where ``perm`` is a random derangement. Returns ``(observed, transition)``."""
    y = np.asarray(true_labels, dtype=np.int64)
    m = num_classes if num_classes is not None else int(y.max()) + 1
    if not 0 <= noise_ratio < 0.5:
        raise ValidationError("asymmetric noise_ratio must lie in [0, 0.5)")
    perm = random_derangement(m, rng)
    observed = y.copy()
    for c in range(m):
        members = np.flatnonzero(y == c)
        k = int(round(members.size * noise_ratio))
        if k:
            observed[rng.choice(members, size=k, replace=False)] = perm[c]
    return observed, realized_transition(y, observed, m)


def make_prototypes(num_classes: int, feature_dim: int, model_quality: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Unit class prototypes.

    Each prototype mixes a private axis with a direction drawn from a shared
    low-rank subspace, so some class pairs look alike and others do not. Pairwise
    cosines lie in ``[-s, s]`` with ``s = 0.9 * (1 - model_quality)`` when
    ``feature_dim`` leaves room for orthogonal axes; quality 1 gives orthogonal
    prototypes.
    """
    rank = max(2, num_classes // 3)
    if feature_dim >= num_classes + rank:
        basis, _ = np.linalg.qr(rng.standard_normal((feature_dim, num_classes + rank)))
        private, shared_basis = basis[:, :num_classes].T, basis[:, num_classes:].T
    else:
        private = rng.standard_normal((num_classes, feature_dim))
        private /= np.linalg.norm(private, axis=1, keepdims=True)
        shared_basis = rng.standard_normal((rank, feature_dim))
    latent = rng.standard_normal((num_classes, rank))
    latent /= np.linalg.norm(latent, axis=1, keepdims=True)
    shared = latent @ shared_basis
    shared /= np.linalg.norm(shared, axis=1, keepdims=True)
    s = 0.9 * (1.0 - model_quality)
    protos = np.sqrt(1.0 - s) * private + np.sqrt(s) * shared
    return protos / np.linalg.norm(protos, axis=1, keepdims=True)


def feature_noise_scale(model_quality: float) -> float:
    return 0.3 + 0.9 * (1.0 - model_quality)


def synthesize_outputs(true_labels, observed, config: SimulatorConfig, rng: np.random.Generator,
                       transition: np.ndarray | None = None):
    """Return ``(probs, features, prototypes)`` for labeled samples."""
    y = np.asarray(true_labels, dtype=np.int64)
    obs = np.asarray(observed, dtype=np.int64)
    m, f, q = config.num_classes, config.feature_dim, config.model_quality
    if f < 2:
        raise ValidationError("feature_dim must be at least 2")
    n = y.shape[0]
    protos = make_prototypes(m, f, q, rng)

    # how learnable each label is: 1 for clean labels, the flip's transition
    # probability relative to staying clean for flipped ones
    if transition is None:
        transition = realized_transition(y, obs, m)
    flipped = y != obs
    stay = np.maximum(transition[y, y], 1e-12)
    learnable = np.minimum(transition[y, obs] / stay, 1.0)

    # features: prototype + random direction of per-sample length
    direction = rng.standard_normal((n, f))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    lo, hi = config.difficulty_range
    difficulty = rng.uniform(lo, hi, size=n)
    sizes = np.bincount(y, minlength=m).astype(np.float64)
    # rarer true classes get less well learned features
    rarity = 1.0 + config.tail_difficulty * (1.0 - q) * np.log10(sizes.max() / np.maximum(sizes, 1.0))
    spread = (feature_noise_scale(q) * difficulty * rarity[y])[:, None] * direction
    clean_view = protos[y] + spread
    clean_view /= np.linalg.norm(clean_view, axis=1, keepdims=True)
    # Flips the classifier cannot fit are absorbed in feature space instead: the
    # feature drifts toward the observed prototype, more so the less learnable
    # the flip is. Confidences below are computed from the undrifted view.
    drift = (1.0 - q) * config.feature_drift * rng.uniform(0.0, 1.0, size=n) * (1.0 - learnable) * flipped
    raw = protos[y] + drift[:, None] * (protos[obs] - protos[y]) + spread
    features = raw / np.linalg.norm(raw, axis=1, keepdims=True)

    # confidences: similarity softmax with a frequency bias on the observed labels
    prior = np.bincount(obs, minlength=m) / n
    logits = (clean_view @ protos.T) / config.temperature
    logits = logits + config.prior_bias * (1.0 - q) * np.log(np.maximum(prior, 1.0 / n))[None, :]
    logits -= logits.max(axis=1, keepdims=True)
    model = np.exp(logits)
    model /= model.sum(axis=1, keepdims=True)

    # memorization pulls toward the observed one-hot; saturating so it never
    # reaches an exact one-hot (exact zeros would put a spike in every metric)
    weight = np.where(flipped, config.flip_memorization * learnable, learnable)
    pull = (1.0 - q) * config.memorization * rng.uniform(0.0, 1.0, size=n) * weight
    strength = 1.0 - np.exp(-pull)
    onehot = np.zeros((n, m))
    onehot[np.arange(n), obs] = 1.0
    probs = (1.0 - strength)[:, None] * model + strength[:, None] * onehot
    probs /= probs.sum(axis=1, keepdims=True)
    return probs, features, protos


def generate(config: SimulatorConfig) -> SyntheticDataset:
    """Build a full dataset. All randomness comes from one generator seeded by
    ``config.seed``, consumed in a fixed order."""
    rng = np.random.default_rng(config.seed)
    counts = longtail_counts(config.num_classes, config.max_class_size, config.imbalance_factor)
    y = np.repeat(np.arange(config.num_classes), counts)
    if config.noise_type == "symmetric":
        obs = inject_symmetric_noise(y, config.noise_ratio, rng, config.num_classes)
        transition = realized_transition(y, obs, config.num_classes)
    else:
        obs, transition = inject_asymmetric_noise(y, config.noise_ratio, rng, config.num_classes)
    probs, features, protos = synthesize_outputs(y, obs, config, rng, transition)
    dataset = Dataset(
        ids=np.arange(y.shape[0], dtype=np.int64),
        observed=obs,
        probs=probs,
        features=features,
        true_labels=y,
        num_classes=config.num_classes,
    )
    out = SyntheticDataset(dataset, config, counts, transition, protos)
    dataset.manifest.update(out.manifest_extra())
    return out
