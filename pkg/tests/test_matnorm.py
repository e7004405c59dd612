import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from mfm_mxn.errors import DimensionError, NotPositiveDefiniteError
from mfm_mxn.matnorm import (
    MatrixNormalParams,
    ar1_cov,
    cov_to_corr,
    kron,
    log_density_matnorm,
    normalize_trace,
    sample_inv_wishart,
    sample_matnorm,
    sample_wishart,
    vec,
)

from oracles import mvn_logpdf, vec_cols


def random_spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + d * np.eye(d) * 0.5


def random_params(rng, p, q):
    return MatrixNormalParams(rng.standard_normal((p, q)), random_spd(rng, p), random_spd(rng, q))


# --------------------------------------------------------------------------- density

def test_scalar_standard_normal():
    params = MatrixNormalParams([[0.0]], [[1.0]], [[1.0]])
    assert log_density_matnorm([[0.0]], params) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)


def test_zero_residual():
    rng = np.random.default_rng(1)
    params = random_params(rng, 3, 2)
    p, q = 3, 2
    expected = (-0.5 * p * q * math.log(2 * math.pi)
                - 0.5 * p * np.linalg.slogdet(params.V)[1]
                - 0.5 * q * np.linalg.slogdet(params.U)[1])
    assert log_density_matnorm(params.M, params) == pytest.approx(expected, rel=1e-12)


def test_matches_vectorized_mvn():
    rng = np.random.default_rng(2)
    for _ in range(100):
        p, q = rng.integers(1, 5, size=2)
        params = random_params(rng, p, q)
        Y = rng.standard_normal((p, q)) * 2
        ref = mvn_logpdf(vec_cols(Y), vec_cols(params.M), np.kron(params.V, params.U))
        assert log_density_matnorm(Y, params) == pytest.approx(ref, rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.01, 100.0), seed=st.integers(0, 2**32 - 1))
def test_density_scale_invariance(a, seed):
    rng = np.random.default_rng(seed)
    params = random_params(rng, 3, 2)
    Y = rng.standard_normal((3, 2))
    scaled = MatrixNormalParams(params.M, a * params.U, params.V / a)
    assert log_density_matnorm(Y, scaled) == pytest.approx(log_density_matnorm(Y, params), abs=1e-10)


def test_density_integrates_to_one():
    params = MatrixNormalParams([[0.3, -0.2]], [[1.3]], [[1.0, 0.4], [0.4, 0.8]])

    def f(y2, y1):
        return math.exp(log_density_matnorm([[y1, y2]], params))

    total, _ = integrate.dblquad(f, -12, 12, -12, 12, epsabs=1e-8)
    assert total == pytest.approx(1.0, abs=1e-4)


def test_density_errors():
    params = MatrixNormalParams(np.zeros((2, 2)), np.eye(2), np.eye(2))
    with pytest.raises(DimensionError):
        log_density_matnorm(np.zeros((2, 3)), params)
    with pytest.raises(NotPositiveDefiniteError):
        MatrixNormalParams(np.zeros((2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2))
    with pytest.raises(NotPositiveDefiniteError):
        MatrixNormalParams(np.zeros((2, 2)), np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(2))


# --------------------------------------------------------------------------- sampling

def test_sample_identity_is_standard_normal():
    rng = np.random.default_rng(3)
    params = MatrixNormalParams(np.zeros((2, 5)), np.eye(2), np.eye(5))
    draws = sample_matnorm(params, rng, size=1000).reshape(-1)
    assert draws.size == 10_000
    assert stats.kstest(draws, "norm").pvalue > 0.01


def test_sample_mean():
    rng = np.random.default_rng(4)
    params = random_params(rng, 3, 2)
    draws = sample_matnorm(params, rng, size=10_000)
    sd = np.sqrt(np.outer(np.diag(params.U), np.diag(params.V)))
    assert np.all(np.abs(draws.mean(axis=0) - params.M) < 4 * sd / 100)


def test_sample_covariance_is_kron():
    rng = np.random.default_rng(5)
    params = MatrixNormalParams(np.zeros((2, 2)), [[1.0, 0.6], [0.6, 2.0]], [[1.5, -0.4], [-0.4, 0.7]])
    draws = sample_matnorm(params, rng, size=100_000)
    X = draws.transpose(0, 2, 1).reshape(len(draws), -1)
    emp = np.cov(X, rowvar=False)
    ref = np.kron(params.V, params.U)
    big = np.abs(ref) > 0.1
    assert np.all(np.abs(emp - ref)[big] <= 0.05 * np.abs(ref)[big])
    assert np.all(np.abs(emp - ref)[~big] < 0.02)


def test_samplers_are_seed_deterministic():
    params = MatrixNormalParams(np.zeros((3, 2)), ar1_cov(3, 0.5), np.eye(2))
    a = sample_matnorm(params, np.random.default_rng(9), size=5)
    b = sample_matnorm(params, np.random.default_rng(9), size=5)
    assert np.array_equal(a, b)
    W1 = sample_inv_wishart(6, np.eye(3), np.random.default_rng(9))
    W2 = sample_inv_wishart(6, np.eye(3), np.random.default_rng(9))
    assert np.array_equal(W1, W2)


# --------------------------------------------------------------------------- kron / vec

def test_kron_identity_and_scalar():
    assert np.array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))
    B = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(kron([[2.0]], B), 2 * B)


def test_kron_mixed_product():
    rng = np.random.default_rng(6)
    A, B, C, D = (rng.standard_normal((2, 2)) for _ in range(4))
    assert np.allclose(kron(A, B) @ kron(C, D), kron(A @ C, B @ D), atol=1e-12)


def test_kron_blocks():
    rng = np.random.default_rng(7)
    A, B = rng.standard_normal((2, 3)), rng.standard_normal((4, 5))
    K = kron(A, B)
    assert K.shape == (8, 15)
    assert np.allclose(K[4:8, 5:10], A[1, 1] * B)


def test_vec():
    assert np.array_equal(vec([[1, 2], [3, 4]]), [1, 3, 2, 4])
    assert np.array_equal(vec([[5, 6, 7]]), [5, 6, 7])
    rng = np.random.default_rng(8)
    A, X, B = rng.standard_normal((3, 3)), rng.standard_normal((3, 2)), rng.standard_normal((2, 2))
    assert np.allclose(vec(A @ X @ B.T), kron(B, A) @ vec(X), atol=1e-12)


# --------------------------------------------------------------------------- Wishart

def test_wishart_scalar_is_chi_square():
    rng = np.random.default_rng(10)
    k = 4.0
    draws = np.array([sample_wishart(k, [[1.0]], rng)[0, 0] for _ in range(100_000)])
    assert draws.mean() == pytest.approx(k, rel=0.05)
    assert draws.var() == pytest.approx(2 * k, rel=0.05)


def test_wishart_mean_and_spd():
    rng = np.random.default_rng(11)
    draws = np.array([sample_wishart(5, np.eye(3), rng) for _ in range(10_000)])
    assert np.all(np.abs(draws.mean(axis=0) - 5 * np.eye(3)) < 0.05 * 5)
    assert all(np.linalg.eigvalsh(W).min() > 0 for W in draws[:500])


def test_inv_wishart_scalar():
    rng = np.random.default_rng(12)
    df, s = 9.0, 2.0
    draws = np.array([sample_inv_wishart(df, [[s]], rng)[0, 0] for _ in range(100_000)])
    # s / chi2(df): mean s/(df-2), variance 2 s^2 / ((df-2)^2 (df-4))
    assert draws.mean() == pytest.approx(s / (df - 2), rel=0.05)
    assert draws.var() == pytest.approx(2 * s**2 / ((df - 2) ** 2 * (df - 4)), rel=0.05)


def test_inv_wishart_mean_and_spd():
    rng = np.random.default_rng(13)
    draws = np.array([sample_inv_wishart(6, np.eye(2), rng) for _ in range(10_000)])
    mean = draws.mean(axis=0)
    assert np.all(np.abs(mean - np.eye(2) / 3) < 0.05 / 3)
    assert all(np.linalg.eigvalsh(np.linalg.inv(W)).min() > 0 for W in draws[:500])


def test_inv_wishart_matches_scipy_in_distribution():
    rng = np.random.default_rng(14)
    scale = np.array([[2.0, 0.5], [0.5, 1.0]])
    ours = np.array([sample_inv_wishart(7, scale, rng)[0, 1] for _ in range(20_000)])
    ref = stats.invwishart(df=7, scale=scale).rvs(20_000, random_state=15)[:, 0, 1]
    assert stats.ks_2samp(ours, ref).pvalue > 0.001


def test_wishart_df_error():
    with pytest.raises(DimensionError):
        sample_wishart(1.5, np.eye(3), np.random.default_rng(0))
    with pytest.raises(DimensionError):
        sample_inv_wishart(2.0, np.eye(4), np.random.default_rng(0))


# --------------------------------------------------------------------------- constructors

def test_ar1():
    assert np.array_equal(ar1_cov(4, 0.0, 2.0), 2 * np.eye(4))
    assert np.allclose(ar1_cov(2, 0.9, 1.0), [[1, 0.9], [0.9, 1]])
    V = ar1_cov(6, 0.9, 0.25)
    i, j = np.indices((6, 6))
    assert np.allclose(V, 0.5**2 * 0.9 ** np.abs(i - j))
    with pytest.raises(ValueError):
        ar1_cov(3, 1.0)


def test_cov_to_corr():
    assert np.array_equal(cov_to_corr(np.diag([4.0, 9.0, 0.5])), np.eye(3))
    C = cov_to_corr([[4.0, 2.0], [2.0, 1.25]])
    assert np.allclose(C, [[1.0, 2 / math.sqrt(5)], [2 / math.sqrt(5), 1.0]], atol=1e-15)
    rng = np.random.default_rng(16)
    for _ in range(20):
        C = cov_to_corr(sample_wishart(11, np.eye(10), rng))
        assert np.all(np.diag(C) == 1.0)
    with pytest.raises(NotPositiveDefiniteError):
        cov_to_corr([[0.0, 0.0], [0.0, 1.0]])


def test_normalize_trace():
    rng = np.random.default_rng(17)
    U = random_spd(rng, 3)
    V = np.diag([0.5, 1.5])
    U2, V2 = normalize_trace(U, V)
    assert np.array_equal(U2, U) and np.array_equal(V2, V)
    U2, V2 = normalize_trace(U, 2 * np.eye(2))
    assert np.allclose(U2, 2 * U) and np.allclose(V2, np.eye(2))
    for _ in range(20):
        U, V = random_spd(rng, 3), random_spd(rng, 4)
        U2, V2 = normalize_trace(U, V)
        assert np.trace(V2) == pytest.approx(4)
        np.testing.assert_allclose(kron(V2, U2), kron(V, U), rtol=1e-12)
