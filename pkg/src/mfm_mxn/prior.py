"""Prior constants of the MFM matrix-normal model and the partition coefficients."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConfigError, DimensionError, SeriesConvergenceError
from .matnorm import as_matrix, check_spd

# relative tail contribution at which the V_n(t) series is truncated
SERIES_RTOL = 1e-12
SERIES_KMAX = 10_000


@dataclass(frozen=True)
class Hyperparams:
    """Fixed prior constants.

    ``beta_scale`` and ``rho_scale`` are the inverse-Wishart scale matrices
    ``2*beta`` and ``2*rho`` themselves, so the row covariance prior has
    density proportional to ``|U|^{-(2 alpha + p + 1)/2} exp(-tr(beta_scale U^{-1})/2)``.
    """

    gamma: float
    tau: float
    M0: np.ndarray
    Sigma0: np.ndarray
    Omega0: np.ndarray
    alpha: float
    beta_scale: np.ndarray
    psi: float
    rho_scale: np.ndarray

    def __post_init__(self):
        M0 = as_matrix(self.M0, "M0")
        p, q = M0.shape
        for name, dim in (("Sigma0", p), ("beta_scale", p), ("Omega0", q), ("rho_scale", q)):
            S = check_spd(getattr(self, name), name)
            if S.shape != (dim, dim):
                raise DimensionError(f"{name} must be {dim}x{dim}, got {S.shape}")
            object.__setattr__(self, name, S)
        object.__setattr__(self, "M0", M0)
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not 2 * self.alpha > p - 1:
            raise ConfigError(f"2*alpha must exceed p - 1 = {p - 1}, got alpha={self.alpha}")
        if not 2 * self.psi > q - 1:
            raise ConfigError(f"2*psi must exceed q - 1 = {q - 1}, got psi={self.psi}")

    @property
    def p(self) -> int:
        return self.M0.shape[0]

    @property
    def q(self) -> int:
        return self.M0.shape[1]

    def replace(self, **changes) -> "Hyperparams":
        fields = {name: getattr(self, name) for name in self.__dataclass_fields__}
        fields.update(changes)
        return Hyperparams(**fields)


def stack_data(data) -> np.ndarray:
    """Stack a sequence of equally-shaped matrices into an ``(n, p, q)`` array."""
    if isinstance(data, np.ndarray) and data.ndim == 3:
        arr = data.astype(float, copy=False)
    else:
        mats = [as_matrix(Y, f"observation {i}") for i, Y in enumerate(data)]
        if not mats:
            raise DimensionError("data is empty")
        shape = mats[0].shape
        for i, Y in enumerate(mats):
            if Y.shape != shape:
                raise DimensionError(f"observation {i} has shape {Y.shape}, expected {shape}")
        arr = np.stack(mats)
    if arr.shape[0] == 0:
        raise DimensionError("data is empty")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("data contains non-finite values")
    return arr


def default_hyperparams(data, gamma: float = 3.0, tau: float = 1.0) -> Hyperparams:
    """Data-driven defaults.

    ``alpha = (p+1)/2``, ``psi = (q+1)/2``, identity inverse-Wishart scales,
    ``M0`` the element-wise midpoint of the data, and ``Sigma0``/``Omega0``
    diagonal with squared half-ranges along each row/column.  A row or column
    with zero range is floored at ``1e-6`` times the global range, with a
    warning.
    """
    Y = stack_data(data)
    n, p, q = Y.shape
    if n == 1 or np.all(Y == Y[0]):
        raise DimensionError("all observations are identical; prior scales are undefined")
    lo, hi = Y.min(axis=0), Y.max(axis=0)
    M0 = 0.5 * (lo + hi)
    row_half = 0.5 * (Y.max(axis=(0, 2)) - Y.min(axis=(0, 2)))
    col_half = 0.5 * (Y.max(axis=(0, 1)) - Y.min(axis=(0, 1)))
    floor = 1e-6 * (Y.max() - Y.min())
    for name, half in (("row", row_half), ("column", col_half)):
        flat = half <= floor
        if np.any(flat):
            warnings.warn(
                f"{name}s {np.flatnonzero(flat).tolist()} have zero range; flooring scale at {floor:.3g}",
                stacklevel=2,
            )
            half[flat] = floor
    return Hyperparams(
        gamma=gamma,
        tau=tau,
        M0=M0,
        Sigma0=np.diag(row_half**2),
        Omega0=np.diag(col_half**2),
        alpha=(p + 1) / 2,
        beta_scale=np.eye(p),
        psi=(q + 1) / 2,
        rho_scale=np.eye(q),
    )


def log_pk(k, tau: float) -> float:
    """Log p.m.f. of a Poisson(tau) truncated to k >= 1."""
    k = np.asarray(k)
    if np.any(k < 1):
        raise ValueError("k must be >= 1")
    out = k * np.log(tau) - tau - gammaln(k + 1) - np.log(-np.expm1(-tau))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PartitionCoefficients:
    """Table of ``log V_n(t)`` for ``t = 1..n+1`` (index ``t - 1``)."""

    n: int
    gamma: float
    tau: float
    log_vn: np.ndarray

    def __call__(self, t: int) -> float:
        if not 1 <= t <= self.n + 1:
            raise IndexError(f"t={t} outside 1..{self.n + 1}")
        return float(self.log_vn[t - 1])

    def log_ratio(self, t: int) -> float:
        """``log V_n(t+1) - log V_n(t)``."""
        return float(self.log_vn[t] - self.log_vn[t - 1])


def _log_terms(k, t, n, gamma, tau):
    # log[k_(t) / (gamma k)^(n) * p_K(k)] for k >= t
    return (
        gammaln(k + 1) - gammaln(k - t + 1)
        - (gammaln(gamma * k + n) - gammaln(gamma * k))
        + log_pk(k, tau)
    )


def log_vn_entry(n: int, t: int, gamma: float, tau: float, kmax: int = SERIES_KMAX,
                 rtol: float = SERIES_RTOL) -> float:
    """``log V_n(t)`` summed in log space from ``k = t`` upward.

    The sum stops once a geometric bound on the remaining tail falls below
    ``rtol`` relative to the partial sum.  ``kmax`` caps the number of terms,
    counted from ``k = t``, since all terms below ``t`` vanish.
    """
    log_rtol = np.log(rtol)
    chunk = 64
    start = t
    acc = -np.inf
    stop = t + kmax
    while start < stop:
        k = np.arange(start, min(start + chunk, stop), dtype=float)
        terms = _log_terms(k, t, n, gamma, tau)
        acc = np.logaddexp(acc, logsumexp(terms))
        # term ratio is at most tau / (k + 1 - t), which bounds the tail geometrically
        log_ratio = np.log(tau) - np.log(k[-1] + 1 - t)
        if log_ratio < 0:
            tail = terms[-1] + log_ratio - np.log(-np.expm1(log_ratio))
            if tail - acc < log_rtol:
                return float(acc)
        start += terms.size
        chunk = min(2 * chunk, 4096)
    raise SeriesConvergenceError(
        f"V_n(t) series for n={n}, t={t}, gamma={gamma}, tau={tau} did not converge within {kmax} terms"
    )


def build_vn_table(n: int, gamma: float, tau: float, kmax: int = SERIES_KMAX) -> PartitionCoefficients:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    table = np.array([log_vn_entry(n, t, gamma, tau, kmax=kmax) for t in range(1, n + 2)])
    return PartitionCoefficients(n=n, gamma=gamma, tau=tau, log_vn=table)


def log_partition_prior(sizes, vn: PartitionCoefficients) -> float:
    """Log MFM prior probability of one set partition with the given block sizes."""
    sizes = np.asarray(sizes, dtype=float)
    g = vn.gamma
    return vn(len(sizes)) + float(np.sum(gammaln(sizes + g) - gammaln(g)))
