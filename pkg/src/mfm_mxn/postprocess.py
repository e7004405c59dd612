"""Summaries of MCMC output: Dahl's least-squares draw, Rand index, chain
selection, the posterior over the number of clusters, covariance error and a
K-means baseline."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .matnorm import kron, normalize_trace
from .prior import stack_data


@dataclass
class PartitionEstimate:
    labels: np.ndarray
    source_draw_index: int
    k_hat: int


def membership_matrix(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("labels are empty")
    return (labels[:, None] == labels[None, :]).astype(float)


def _draw_labels(trace):
    if hasattr(trace, "labels"):
        return np.asarray(trace.labels)
    return np.asarray(trace)


def dahl_select(trace) -> PartitionEstimate:
    """Pick the retained draw whose co-clustering matrix is closest, in squared
    element-wise distance, to the posterior mean co-clustering matrix.

    ``trace`` is a :class:`~mfm_mxn.gibbs.ChainTrace` or an ``(L, n)`` label
    array.  Ties go to the earliest draw.
    """
    draws = _draw_labels(trace)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise ValueError("trace has no retained draws")
    L = draws.shape[0]
    mean = np.zeros((draws.shape[1],) * 2)
    for z in draws:
        mean += membership_matrix(z)
    mean /= L
    scores = np.array([np.sum((membership_matrix(z) - mean) ** 2) for z in draws])
    best = int(np.argmin(scores))
    labels = draws[best]
    return PartitionEstimate(labels=labels.copy(), source_draw_index=best, k_hat=len(np.unique(labels)))


def rand_index(a, b) -> float:
    """Fraction of item pairs on which two partitions agree."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    pairs = n * (n - 1) // 2
    both = int(np.sum(table * (table - 1) // 2))
    in_a = int(np.sum(table.sum(axis=1) * (table.sum(axis=1) - 1) // 2))
    in_b = int(np.sum(table.sum(axis=0) * (table.sum(axis=0) - 1) // 2))
    disagree = in_a + in_b - 2 * both
    return (pairs - disagree) / pairs


def select_representative_chain(estimates) -> int:
    """Index of the chain whose partition has the highest mean Rand index
    against every other chain's partition."""
    if len(estimates) < 2:
        raise ValueError("need at least two chains")
    labels = [np.asarray(getattr(e, "labels", e)) for e in estimates]
    C = len(labels)
    R = np.ones((C, C))
    for i in range(C):
        for j in range(i + 1, C):
            R[i, j] = R[j, i] = rand_index(labels[i], labels[j])
    mean = (R.sum(axis=1) - 1.0) / (C - 1)
    return int(np.argmax(mean))


def k_posterior(trace) -> dict:
    counts = np.asarray(trace.n_clusters if hasattr(trace, "n_clusters") else trace)
    if counts.size == 0:
        raise ValueError("trace has no retained draws")
    tally = Counter(int(k) for k in counts)
    return {k: tally[k] / counts.size for k in sorted(tally)}


def rmse_kron(U_hat, V_hat, U_true, V_true) -> float:
    """RMSE between ``kron(V, U)`` of two trace-normalized covariance pairs."""
    U_hat, V_hat, U_true, V_true = (np.asarray(x, dtype=float) for x in (U_hat, V_hat, U_true, V_true))
    if U_hat.shape != U_true.shape or V_hat.shape != V_true.shape:
        raise ValueError("covariance dimensions differ")
    Uh, Vh = normalize_trace(U_hat, V_hat)
    Ut, Vt = normalize_trace(U_true, V_true)
    return float(np.sqrt(np.mean((kron(Vh, Uh) - kron(Vt, Ut)) ** 2)))


def _kmeans_pp(X, k, rng):
    centers = [X[rng.integers(X.shape[0])]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(X.shape[0])
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, X.shape[0] - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def lloyd(X, centers, max_iter=300):
    """Lloyd iterations from the given centers.

    Returns ``(labels, centers, objective_history)``.
    """
    X = np.asarray(X, dtype=float)
    centers = np.array(centers, dtype=float)
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = np.sum((X[:, None, :] - centers[None]) ** 2, axis=2)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(X.shape[0]), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(centers.shape[0]):
            members = X[labels == c]
            if members.shape[0]:
                centers[c] = members.mean(axis=0)
    return labels, centers, history


def kmeans_baseline(data, k: int, rng: np.random.Generator, n_init: int = 10) -> np.ndarray:
    """K-means on vectorized matrices with k-means++ seeding; best of ``n_init`` restarts."""
    X = stack_data(data)
    n = X.shape[0]
    X = X.reshape(n, -1)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    best, best_obj = None, np.inf
    for _ in range(n_init):
        labels, _, history = lloyd(X, _kmeans_pp(X, k, rng))
        if history[-1] < best_obj:
            best, best_obj = labels, history[-1]
    return best
