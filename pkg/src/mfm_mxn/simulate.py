"""Synthetic benchmarks: a generic matrix normal mixture and the small/large scenarios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matnorm import MatrixNormalParams, ar1_cov, cov_to_corr, sample_matnorm, sample_wishart

SMALL_SHAPE = (10, 6)
LARGE_SHAPE = (25, 18)

# court geometry for the large scenario, feet; rows span the 50 ft width, columns the 36 ft depth
_COURT_WIDTH = 50.0
_COURT_DEPTH = 36.0
_BASKET = (25.0, 5.25)
_THREE_POINT_RADIUS = 23.75


@dataclass
class GeneratorSpec:
    weights: np.ndarray
    components: list
    n: int
    seed: int | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be positive and sum to 1, got {w}")
        if not self.components or len(self.components) != w.size:
            raise ValueError("need one component per weight")
        shape = self.components[0].shape
        if any(c.shape != shape for c in self.components):
            raise ValueError("components must share dimensions")
        self.weights = w

    @property
    def shape(self):
        return self.components[0].shape


@dataclass
class LabeledDataset:
    data: np.ndarray  # (n, p, q)
    true_labels: np.ndarray
    spec: GeneratorSpec


def gen_mixture(spec: GeneratorSpec, rng: np.random.Generator) -> LabeledDataset:
    labels = rng.choice(len(spec.weights), size=spec.n, p=spec.weights)
    p, q = spec.shape
    data = np.empty((spec.n, p, q))
    for k, comp in enumerate(spec.components):
        idx = np.flatnonzero(labels == k)
        if idx.size:
            data[idx] = sample_matnorm(comp, rng, size=idx.size)
    return LabeledDataset(data=data, true_labels=labels, spec=spec)


def _streams(seed):
    # covariance draws and data draws come from separate children of one seed
    ss = np.random.SeedSequence(seed)
    cov_ss, data_ss = ss.spawn(2)
    return np.random.default_rng(cov_ss), np.random.default_rng(data_ss)


def small_means() -> list:
    """Three binary 10x6 masks: a filled rectangle, a plus sign and a hollow frame."""
    p, q = SMALL_SHAPE
    rect = np.zeros((p, q))
    rect[2:8, 1:5] = 1.0
    cross = np.zeros((p, q))
    cross[4:6, :] = 1.0
    cross[:, 2:4] = 1.0
    frame = np.ones((p, q))
    frame[1:-1, 1:-1] = 0.0
    return [rect, cross, frame]


def small_scenario(n: int, noise: str = "high", seed=None) -> LabeledDataset:
    """10x6 scenario: binary masks, Wishart-correlation rows, AR(1) columns."""
    if n < 3:
        raise ValueError("n must be >= 3")
    if noise not in ("high", "low"):
        raise ValueError(f"noise must be 'high' or 'low', got {noise!r}")
    p, q = SMALL_SHAPE
    cov_rng, data_rng = _streams(seed)
    U = cov_to_corr(sample_wishart(p + 1, np.eye(p), cov_rng))
    V = ar1_cov(q, 0.9, 1.0 if noise == "high" else 0.25)
    comps = [MatrixNormalParams(M, U, V) for M in small_means()]
    spec = GeneratorSpec(weights=[0.3, 0.3, 0.4], components=comps, n=n, seed=seed)
    return gen_mixture(spec, data_rng)


def _court_grid(shape=LARGE_SHAPE):
    p, q = shape
    x = (np.arange(p) + 0.5) * _COURT_WIDTH / p
    y = (np.arange(q) + 0.5) * _COURT_DEPTH / q
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.hypot(X - _BASKET[0], Y - _BASKET[1])


def _rescale(S, top=3.0):
    return top * (S - S.min()) / (S.max() - S.min())


def large_means() -> list:
    """Three 25x18 log-intensity surfaces on [0, 3].

    Inside-dominant (bump at the basket), all-around (flat level with a mild
    bump) and perimeter-dominant (ridge along the three-point arc).
    """
    d = _court_grid()
    inside = _rescale(np.exp(-0.5 * (d / 5.0) ** 2))
    around = 1.2 + 0.9 * np.exp(-0.5 * (d / 9.0) ** 2)
    around = np.clip(around + 0.3 * np.exp(-0.5 * ((d - _THREE_POINT_RADIUS) / 3.0) ** 2), 0.0, 3.0)
    perimeter = np.exp(-0.5 * ((d - _THREE_POINT_RADIUS) / 2.5) ** 2) + 0.35 * np.exp(-0.5 * (d / 3.0) ** 2)
    perimeter = _rescale(perimeter)
    return [inside, around, perimeter]


def large_scenario(n: int, sigma: float = 1.0, rho: float = 0.6, seed=None) -> LabeledDataset:
    """25x18 scenario: shot-profile means, Wishart-correlation rows, AR(1) columns."""
    if n < 3:
        raise ValueError("n must be >= 3")
    p, q = LARGE_SHAPE
    cov_rng, data_rng = _streams(seed)
    U = cov_to_corr(sample_wishart(p + 1, np.eye(p), cov_rng))
    V = ar1_cov(q, rho, sigma**2)
    comps = [MatrixNormalParams(M, U, V) for M in large_means()]
    spec = GeneratorSpec(weights=[0.3, 0.4, 0.3], components=comps, n=n, seed=seed)
    return gen_mixture(spec, data_rng)


def bayes_classify(data, spec: GeneratorSpec) -> np.ndarray:
    """Labels maximizing the true posterior component probability."""
    from .matnorm import log_density_matnorm

    scores = np.array([
        [np.log(w) + log_density_matnorm(Y, comp) for w, comp in zip(spec.weights, spec.components)]
        for Y in data
    ])
    return scores.argmax(axis=1)
