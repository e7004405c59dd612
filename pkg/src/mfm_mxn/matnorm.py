"""Matrix normal kernels, Wishart samplers and covariance constructors.

Matrices are plain 2-D ``numpy`` float arrays.  ``vec`` stacks columns, so a
``p x q`` matrix ``Y`` with ``Y ~ MN(M, U, V)`` satisfies
``vec(Y) ~ N(vec(M), kron(V, U))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, NotPositiveDefiniteError

LOG_2PI = np.log(2.0 * np.pi)

# smallest admissible Cholesky pivot, relative to the largest diagonal entry
_PIVOT_FLOOR = 1e-12
_SYMMETRY_RTOL = 1e-10


def as_matrix(Y, name="matrix") -> np.ndarray:
    """Return ``Y`` as a finite 2-D float array."""
    arr = np.asarray(Y, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} has non-finite entries")
    return arr


def check_spd(S, name="matrix") -> np.ndarray:
    """Validate symmetry and positive definiteness; return the array."""
    S = as_matrix(S, name)
    if S.shape[0] != S.shape[1]:
        raise DimensionError(f"{name} must be square, got {S.shape}")
    scale = max(np.max(np.abs(S)), np.finfo(float).tiny)
    if np.max(np.abs(S - S.T)) > _SYMMETRY_RTOL * scale:
        raise NotPositiveDefiniteError(f"{name} is not symmetric")
    cholesky(S, name)
    return S


def cholesky(S, name="matrix") -> np.ndarray:
    """Lower Cholesky factor.  Raises instead of jittering."""
    S = np.asarray(S, dtype=float)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorization of {name} failed") from exc
    pivots = np.diag(L) ** 2
    if pivots.min() <= _PIVOT_FLOOR * np.max(np.diag(S)):
        raise NotPositiveDefiniteError(
            f"{name} is numerically singular (min pivot {pivots.min():.3e})"
        )
    return L


def logdet_chol(L) -> float:
    """log|A| from the lower Cholesky factor of A."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def chol_inverse(L) -> np.ndarray:
    """A^{-1} from the lower Cholesky factor of A."""
    Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return Linv.T @ Linv


@dataclass(frozen=True)
class MatrixNormalParams:
    """Mean ``M`` (p x q), row covariance ``U`` (p x p), column covariance ``V`` (q x q)."""

    M: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        M = as_matrix(self.M, "M")
        U = check_spd(self.U, "U")
        V = check_spd(self.V, "V")
        if U.shape[0] != M.shape[0] or V.shape[0] != M.shape[1]:
            raise DimensionError(
                f"inconsistent shapes: M {M.shape}, U {U.shape}, V {V.shape}"
            )
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def shape(self):
        return self.M.shape


def vec(Y) -> np.ndarray:
    """Column-stacked vectorization."""
    return np.asarray(Y, dtype=float).reshape(-1, order="F")


def unvec(x, p, q) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(x, dtype=float).reshape((p, q), order="F")


def kron(A, B) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` equals ``A[i, j] * B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    out = A[:, None, :, None] * B[None, :, None, :]
    return out.reshape(A.shape[0] * B.shape[0], A.shape[1] * B.shape[1])


def log_density_matnorm(Y, params: MatrixNormalParams) -> float:
    """Log density of ``Y`` under ``MN(M, U, V)``.

    The quadratic form ``tr[V^{-1} R^T U^{-1} R]`` is evaluated as the squared
    Frobenius norm of ``L_U^{-1} R L_V^{-T}`` with ``R = Y - M``.
    """
    Y = as_matrix(Y, "Y")
    if Y.shape != params.M.shape:
        raise DimensionError(f"Y has shape {Y.shape}, expected {params.M.shape}")
    p, q = Y.shape
    LU = cholesky(params.U, "U")
    LV = cholesky(params.V, "V")
    W = solve_triangular(LU, Y - params.M, lower=True)
    W = solve_triangular(LV, W.T, lower=True)
    quad = float(np.sum(W * W))
    return -0.5 * quad - 0.5 * p * q * LOG_2PI - 0.5 * p * logdet_chol(LV) - 0.5 * q * logdet_chol(LU)


def sample_matnorm(params: MatrixNormalParams, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw ``M + A Z B^T`` with ``A = chol(U)``, ``B = chol(V)``.

    With ``size`` given, returns an array of shape ``(size, p, q)``.
    """
    A = cholesky(params.U, "U")
    B = cholesky(params.V, "V")
    p, q = params.M.shape
    if size is None:
        Z = rng.standard_normal((p, q))
        return params.M + A @ Z @ B.T
    Z = rng.standard_normal((size, p, q))
    return params.M + A @ Z @ B.T


def _bartlett_factor(df, dim, rng) -> np.ndarray:
    """Lower-triangular Bartlett factor of a Wishart(df, I) draw."""
    A = np.zeros((dim, dim))
    A[np.diag_indices(dim)] = np.sqrt(rng.chisquare(df - np.arange(dim)))
    rows, cols = np.tril_indices(dim, -1)
    A[rows, cols] = rng.standard_normal(rows.size)
    return A


def _check_df(df, dim):
    if not df > dim - 1:
        raise DimensionError(f"degrees of freedom {df} must exceed dim - 1 = {dim - 1}")


def sample_wishart(df: float, scale, rng: np.random.Generator) -> np.ndarray:
    """Wishart draw by the Bartlett decomposition; ``E[W] = df * scale``."""
    scale = check_spd(scale, "scale")
    dim = scale.shape[0]
    _check_df(df, dim)
    L = cholesky(scale, "scale")
    LA = L @ _bartlett_factor(df, dim, rng)
    return LA @ LA.T


def sample_inv_wishart(df: float, scale, rng: np.random.Generator) -> np.ndarray:
    """Inverse-Wishart draw with density proportional to
    ``|S|^{-(df+dim+1)/2} exp(-tr(scale S^{-1})/2)``.

    Computed as the inverse of a ``Wishart(df, scale^{-1})`` draw; the mean is
    ``scale / (df - dim - 1)`` when ``df > dim + 1``.
    """
    scale = check_spd(scale, "scale")
    dim = scale.shape[0]
    _check_df(df, dim)
    # W = (L_S^{-T} A)(L_S^{-T} A)^T  =>  W^{-1} = L_S A^{-T} A^{-1} L_S^T
    L = cholesky(scale, "scale")
    A = _bartlett_factor(df, dim, rng)
    G = solve_triangular(A, L.T, lower=True).T
    S = G @ G.T
    return 0.5 * (S + S.T)


def ar1_cov(dim: int, rho: float, sigma2: float = 1.0) -> np.ndarray:
    """AR(1) covariance with entries ``sigma2 * rho**|i-j|``."""
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    idx = np.arange(dim)
    return sigma2 * rho ** np.abs(idx[:, None] - idx[None, :])


def cov_to_corr(S) -> np.ndarray:
    S = as_matrix(S, "S")
    d = np.diag(S)
    if np.any(d <= 0):
        raise NotPositiveDefiniteError("covariance has non-positive diagonal")
    s = np.sqrt(d)
    C = S / np.outer(s, s)
    C[np.diag_indices_from(C)] = 1.0
    return C


def normalize_trace(U, V):
    """Rescale so that ``tr(V) = q``; ``kron(V, U)`` is unchanged."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    c = np.trace(V) / V.shape[0]
    return U * c, V / c


def log_inv_wishart_pdf(S, df: float, scale) -> float:
    """Log density of the inverse-Wishart with the parameterization of
    :func:`sample_inv_wishart`."""
    from scipy.special import multigammaln

    S = np.asarray(S, dtype=float)
    scale = np.asarray(scale, dtype=float)
    d = S.shape[0]
    LS = cholesky(S, "S")
    Lscale = cholesky(scale, "scale")
    tr = float(np.trace(chol_inverse(LS) @ scale))
    return (
        0.5 * df * logdet_chol(Lscale)
        - 0.5 * df * d * np.log(2.0)
        - multigammaln(0.5 * df, d)
        - 0.5 * (df + d + 1) * logdet_chol(LS)
        - 0.5 * tr
    )
