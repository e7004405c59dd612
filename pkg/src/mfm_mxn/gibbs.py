"""Collapsed Gibbs sampler for the MFM mixture of matrix normals with shared covariances.

One sweep updates, in order, the cluster labels (cluster weights integrated out),
the cluster means, and the shared row/column covariances ``U`` and ``V``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ConfigError, DimensionError, MfmError, SamplerError, StaleCacheError
from .matnorm import (
    LOG_2PI,
    chol_inverse,
    cholesky,
    kron,
    log_inv_wishart_pdf,
    logdet_chol,
    normalize_trace,
    sample_inv_wishart,
    vec,
)
from .prior import Hyperparams, PartitionCoefficients, build_vn_table, log_partition_prior, stack_data

logger = logging.getLogger(__name__)


@dataclass
class ChainConfig:
    iterations: int
    burnin: int
    seed: int
    thin: int = 1
    initial_clusters: int = 10
    # hold U and V at their initial values; used by the exact partition-posterior check
    fix_covariances: bool = False
    debug: bool = False

    def __post_init__(self):
        if not 0 <= self.burnin < self.iterations:
            raise ConfigError(f"need 0 <= burnin < iterations, got {self.burnin}, {self.iterations}")
        if self.thin < 1:
            raise ConfigError(f"thin must be >= 1, got {self.thin}")
        if self.initial_clusters < 1:
            raise ConfigError("initial_clusters must be >= 1")


@dataclass
class ClusterState:
    """Labels ``0..K-1``, one mean per label, and the shared covariances.

    ``revision`` increases whenever ``U`` or ``V`` change; caches built from
    an older revision are rejected.
    """

    labels: np.ndarray
    means: list
    U: np.ndarray
    V: np.ndarray
    revision: int = 0

    @property
    def n_clusters(self) -> int:
        return len(self.means)

    def copy(self) -> "ClusterState":
        return ClusterState(
            labels=self.labels.copy(),
            means=[m.copy() for m in self.means],
            U=self.U.copy(),
            V=self.V.copy(),
            revision=self.revision,
        )

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)

    def check(self):
        K = self.n_clusters
        if K < 1:
            raise SamplerError("state has no clusters")
        if self.labels.min() < 0 or self.labels.max() >= K:
            raise SamplerError("label without a mean")
        if np.any(self.sizes() == 0):
            raise SamplerError("empty cluster persisted")
        cholesky(self.U, "U")
        cholesky(self.V, "V")


def compact_labels(labels):
    """Relabel to ``0..K-1`` by first appearance.  Returns ``(labels, order)``
    where ``order[new] = old``."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    remap = {old: new for new, old in enumerate(order)}
    return np.array([remap[z] for z in labels], dtype=int), order


def _compact(state: ClusterState) -> ClusterState:
    labels, order = compact_labels(state.labels)
    state.labels = labels
    state.means = [state.means[k] for k in order]
    return state


class MarginalCache:
    """Factorized pieces of the single-observation marginal ``m(Y | U, V)``.

    Holds the Cholesky factor of ``V^{-1} (x) U^{-1} + Omega0^{-1} (x) Sigma0^{-1}``
    together with every term of ``log m`` that does not depend on ``Y``.
    """

    def __init__(self, U, V, hyper: Hyperparams, revision: int = 0):
        self.U = np.array(U, dtype=float)
        self.V = np.array(V, dtype=float)
        self.revision = revision
        p, q = hyper.p, hyper.q
        self.p, self.q = p, q
        LU, LV = cholesky(self.U, "U"), cholesky(self.V, "V")
        self.Uinv, self.Vinv = chol_inverse(LU), chol_inverse(LV)
        self.logdet_U, self.logdet_V = logdet_chol(LU), logdet_chol(LV)
        # whitening maps: W = LU^{-1} Y LV^{-T} has i.i.d. standard normal entries
        self.LU_inv = solve_triangular(LU, np.eye(p), lower=True)
        self.LV_inv = solve_triangular(LV, np.eye(q), lower=True)

        LS, LO = cholesky(hyper.Sigma0, "Sigma0"), cholesky(hyper.Omega0, "Omega0")
        Sinv, Oinv = chol_inverse(LS), chol_inverse(LO)
        self.lik_prec = kron(self.Vinv, self.Uinv)
        self.prior_prec = kron(Oinv, Sinv)
        self.prior_shift = vec(Sinv @ hyper.M0 @ Oinv)  # (Omega0^{-1} (x) Sigma0^{-1}) vec(M0)
        self.chol_post = cholesky(self.lik_prec + self.prior_prec, "posterior precision")
        self.const = (
            -0.5 * float(vec(hyper.M0) @ self.prior_shift)
            - 0.5 * p * q * LOG_2PI
            - 0.5 * p * self.logdet_V
            - 0.5 * q * self.logdet_U
            - 0.5 * p * logdet_chol(LO)
            - 0.5 * q * logdet_chol(LS)
            - 0.5 * logdet_chol(self.chol_post)
        )
        # constant of log f(Y | M, U, V)
        self.f_const = -0.5 * p * q * LOG_2PI - 0.5 * p * self.logdet_V - 0.5 * q * self.logdet_U

    def check(self, U, V, revision=None):
        if revision is not None and revision != self.revision:
            raise StaleCacheError(f"cache revision {self.revision}, state revision {revision}")
        if not (np.array_equal(U, self.U) and np.array_equal(V, self.V)):
            raise StaleCacheError("cache was built for different covariances")

    def whiten(self, Y) -> np.ndarray:
        """Row-flattened ``LU^{-1} Y LV^{-T}`` for one matrix or a stack."""
        W = self.LU_inv @ np.asarray(Y) @ self.LV_inv.T
        return W.reshape(W.shape[:-2] + (-1,))

    def lik_apply(self, Y) -> np.ndarray:
        """``(V^{-1} (x) U^{-1}) vec(Y)`` for a stack ``(n, p, q)``, returned as ``(pq, n)``."""
        Z = self.Uinv @ Y @ self.Vinv
        return Z.transpose(0, 2, 1).reshape(Y.shape[0], -1).T

    def posterior_terms(self, Y):
        """Return ``(log m(Y_i), mu_tilde_i)`` for a stack of observations."""
        Y = np.asarray(Y, dtype=float)
        n = Y.shape[0]
        Yv = Y.transpose(0, 2, 1).reshape(n, -1).T
        AY = self.lik_apply(Y)
        b = AY + self.prior_shift[:, None]
        h = solve_triangular(self.chol_post, b, lower=True)
        mu = solve_triangular(self.chol_post.T, h, lower=False)
        quad = np.sum(Yv * AY, axis=0) - np.sum(h * h, axis=0)
        return self.const - 0.5 * quad, mu

    def sample_posterior_mean(self, mu_vec, rng) -> np.ndarray:
        """Draw ``vec(M) ~ N(mu_vec, Sigma_tilde)`` and return it as a ``p x q`` matrix."""
        z = rng.standard_normal(mu_vec.shape[0])
        x = mu_vec + solve_triangular(self.chol_post.T, z, lower=False)
        return x.reshape((self.p, self.q), order="F")


def marginal_loglik(Y, cache: MarginalCache, U, V, hyper: Hyperparams) -> float:
    """``log m(Y | U, V)``: the matrix normal likelihood with the mean integrated
    against its ``MN(M0, Sigma0, Omega0)`` prior."""
    cache.check(U, V)
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (hyper.p, hyper.q):
        raise DimensionError(f"Y has shape {Y.shape}, expected {(hyper.p, hyper.q)}")
    logm, _ = cache.posterior_terms(Y[None])
    return float(logm[0])


def update_assignments(state: ClusterState, data, hyper: Hyperparams, vn: PartitionCoefficients,
                       cache: MarginalCache, rng: np.random.Generator) -> ClusterState:
    """One systematic scan over the labels.

    Observation ``i`` joins existing cluster ``c`` with weight
    ``(n_c + gamma) f(Y_i | M_c, U, V)`` (``n_c`` excluding ``i``) or a new
    cluster with weight ``gamma * V_n(t+1)/V_n(t) * m(Y_i | U, V)`` where ``t``
    is the number of clusters among the other observations.  A new cluster's
    mean is drawn from its one-observation posterior immediately.
    """
    cache.check(state.U, state.V, state.revision)
    Y = stack_data(data)
    n = Y.shape[0]
    state = state.copy()
    labels = state.labels
    means = state.means
    gamma = hyper.gamma
    log_gamma = np.log(gamma)

    logm, mu = cache.posterior_terms(Y)
    Yw = cache.whiten(Y)
    Mw = cache.whiten(np.asarray(means))
    counts = np.bincount(labels, minlength=len(means)).astype(float)
    log_new = log_gamma + logm
    u = rng.random

    for i in range(n):
        z = labels[i]
        counts[z] -= 1
        if counts[z] == 0:
            counts = np.delete(counts, z)
            Mw = np.delete(Mw, z, axis=0)
            del means[z]
            labels[labels > z] -= 1
        K = len(means)
        if K == 0:
            choice = 0
        else:
            d = Yw[i] - Mw
            logw = np.empty(K + 1)
            logw[:K] = np.log(counts + gamma) - 0.5 * np.einsum("ij,ij->i", d, d) + cache.f_const
            logw[K] = log_new[i] + vn.log_ratio(K)
            w = np.exp(logw - logw.max())
            c = np.cumsum(w)
            choice = int(np.searchsorted(c, u() * c[-1], side="right"))
        if choice == K:
            M_new = cache.sample_posterior_mean(mu[:, i], rng)
            means.append(M_new)
            Mw = np.vstack([Mw, cache.whiten(M_new)[None]]) if K else cache.whiten(M_new)[None]
            counts = np.append(counts, 1.0)
        else:
            counts[choice] += 1
        labels[i] = choice
    return state


def update_cluster_means(state: ClusterState, data, hyper: Hyperparams, rng: np.random.Generator,
                         cache: MarginalCache | None = None) -> ClusterState:
    """Draw each ``vec(M_c)`` from its Gaussian full conditional with precision
    ``n_c (V^{-1} (x) U^{-1}) + Omega0^{-1} (x) Sigma0^{-1}``."""
    if cache is None:
        cache = MarginalCache(state.U, state.V, hyper, state.revision)
    else:
        cache.check(state.U, state.V, state.revision)
    Y = stack_data(data)
    state = state.copy()
    p, q = hyper.p, hyper.q
    sizes = state.sizes()
    for c in range(state.n_clusters):
        S = Y[state.labels == c].sum(axis=0)
        P = sizes[c] * cache.lik_prec + cache.prior_prec
        L = cholesky(P, f"mean precision of cluster {c}")
        b = vec(cache.Uinv @ S @ cache.Vinv) + cache.prior_shift
        center = cho_solve((L, True), b)
        x = center + solve_triangular(L.T, rng.standard_normal(p * q), lower=False)
        state.means[c] = x.reshape((p, q), order="F")
    return state


def update_covariances(state: ClusterState, data, hyper: Hyperparams, rng: np.random.Generator) -> ClusterState:
    """Draw ``U | V`` then ``V | U`` from their inverse-Wishart full conditionals."""
    state = state.copy()
    Y = np.asarray(data, dtype=float)
    p, q = hyper.p, hyper.q
    if Y.size == 0:
        R = np.zeros((0, p, q))
    else:
        Y = stack_data(Y)
        R = Y - np.asarray(state.means)[state.labels]
    n = R.shape[0]
    Vinv = chol_inverse(cholesky(state.V, "V"))
    # sum_i R_i V^{-1} R_i^T and sum_i R_i^T U^{-1} R_i as single matrix products
    Rp = R.transpose(1, 0, 2).reshape(p, n * q)
    SU = (R @ Vinv).transpose(1, 0, 2).reshape(p, n * q) @ Rp.T
    U = sample_inv_wishart(2 * hyper.alpha + n * q, hyper.beta_scale + SU, rng)
    Uinv = chol_inverse(cholesky(U, "U"))
    Rq = R.transpose(2, 0, 1).reshape(q, n * p)
    SV = Rq @ (Uinv @ R).transpose(2, 0, 1).reshape(q, n * p).T
    SU, SV = 0.5 * (SU + SU.T), 0.5 * (SV + SV.T)
    V = sample_inv_wishart(2 * hyper.psi + n * p, hyper.rho_scale + SV, rng)
    state.U, state.V = U, V
    state.revision += 1
    return state


def log_joint(state: ClusterState, data, hyper: Hyperparams, vn: PartitionCoefficients,
              cache: MarginalCache | None = None) -> float:
    """Unnormalized log posterior of ``(Z, M, U, V)`` with weights and K integrated out."""
    if cache is None:
        cache = MarginalCache(state.U, state.V, hyper, state.revision)
    Y = stack_data(data)
    M = np.asarray(state.means)
    W = cache.whiten(Y - M[state.labels])
    out = Y.shape[0] * cache.f_const - 0.5 * float(np.sum(W * W))
    D = (M - hyper.M0).transpose(0, 2, 1).reshape(len(M), -1)
    LP = cholesky(cache.prior_prec, "prior precision")
    pq = hyper.p * hyper.q
    out += -0.5 * float(np.sum((D @ cache.prior_prec) * D)) + len(M) * (0.5 * logdet_chol(LP) - 0.5 * pq * LOG_2PI)
    out += log_inv_wishart_pdf(state.U, 2 * hyper.alpha, hyper.beta_scale)
    out += log_inv_wishart_pdf(state.V, 2 * hyper.psi, hyper.rho_scale)
    out += log_partition_prior(state.sizes(), vn)
    return float(out)


@dataclass
class RetainedState:
    iteration: int
    labels: np.ndarray
    n_clusters: int
    means: np.ndarray  # (K, p, q)
    U: np.ndarray  # trace-normalized so tr(V) = q
    V: np.ndarray
    log_joint: float


@dataclass
class ChainTrace:
    states: list = field(default_factory=list)
    log_joint: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seed: int | None = None

    def __len__(self):
        return len(self.states)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.labels for s in self.states])

    @property
    def n_clusters(self) -> np.ndarray:
        return np.array([s.n_clusters for s in self.states])


def initial_state(Y, config: ChainConfig) -> ClusterState:
    n, p, q = Y.shape
    k = min(config.initial_clusters, n)
    labels = np.arange(n) % k
    means = [Y[labels == c].mean(axis=0) for c in range(k)]
    return ClusterState(labels=labels, means=means, U=np.eye(p), V=np.eye(q))


def sweep(state, Y, hyper, vn, rng, fix_covariances=False, cache=None):
    if cache is None or cache.revision != state.revision:
        cache = MarginalCache(state.U, state.V, hyper, state.revision)
    state = update_assignments(state, Y, hyper, vn, cache, rng)
    state = update_cluster_means(state, Y, hyper, rng, cache)
    if not fix_covariances:
        state = update_covariances(state, Y, hyper, rng)
        cache = None
    return _compact(state), cache


def run_chain(data, config: ChainConfig, hyper: Hyperparams, vn: PartitionCoefficients | None = None,
              initial: ClusterState | None = None) -> ChainTrace:
    """Run one chain and keep the post-burn-in, thinned states."""
    Y = stack_data(data)
    n = Y.shape[0]
    if n < 2:
        raise DimensionError("run_chain needs at least two observations")
    if Y.shape[1:] != (hyper.p, hyper.q):
        raise DimensionError(f"data shape {Y.shape[1:]} does not match hyperparameters {(hyper.p, hyper.q)}")
    if vn is None:
        vn = build_vn_table(n, hyper.gamma, hyper.tau)
    elif vn.n != n or vn.gamma != hyper.gamma or vn.tau != hyper.tau:
        raise ConfigError("partition coefficient table does not match data size / hyperparameters")
    rng = np.random.default_rng(config.seed)
    state = initial.copy() if initial is not None else initial_state(Y, config)
    trace = ChainTrace(seed=config.seed)
    lj = np.empty(config.iterations)
    cache = None
    for it in range(1, config.iterations + 1):
        try:
            state, cache = sweep(state, Y, hyper, vn, rng, config.fix_covariances, cache)
            if config.debug:
                state.check()
            lj[it - 1] = log_joint(state, Y, hyper, vn, cache)
        except MfmError as exc:
            raise SamplerError(str(exc), iteration=it) from exc
        except np.linalg.LinAlgError as exc:
            raise SamplerError(f"linear algebra failure: {exc}", iteration=it) from exc
        if it > config.burnin and (it - config.burnin) % config.thin == 0:
            U, V = normalize_trace(state.U, state.V)
            trace.states.append(RetainedState(
                iteration=it,
                labels=state.labels.copy(),
                n_clusters=state.n_clusters,
                means=np.array(state.means),
                U=U,
                V=V,
                log_joint=float(lj[it - 1]),
            ))
        if it % 100 == 0:
            logger.debug("seed %s iteration %d: K=%d", config.seed, it, state.n_clusters)
    trace.log_joint = lj
    return trace
