import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from tenrec.linalg import (
    SvdResult,
    make_rng,
    nuclear_norm,
    numerical_rank,
    random_gaussian,
    random_orthonormal,
    singular_values,
    spectral_norm,
    svt_shrink,
    svt_shrink_partial,
    thin_svd,
)


def test_thin_svd_diag():
    res = thin_svd(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(res.singular_values, [3.0, 1.0])


@pytest.mark.parametrize("shape", [(50, 80), (80, 50), (7, 7), (1, 9)])
def test_thin_svd_invariants(shape):
    A = make_rng(0).standard_normal(shape)
    res = thin_svd(A)
    k = min(shape)
    assert res.U.shape == (shape[0], k) and res.V.shape == (shape[1], k)
    assert np.linalg.norm(res.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)
    np.testing.assert_allclose(res.U.T @ res.U, np.eye(k), atol=1e-10)
    np.testing.assert_allclose(res.V.T @ res.V, np.eye(k), atol=1e-10)
    assert np.all(np.diff(res.singular_values) <= 0) and np.all(res.singular_values >= 0)


def test_thin_svd_low_rank_and_errors():
    rng = make_rng(1)
    A = rng.standard_normal((40, 3)) @ rng.standard_normal((3, 30))
    s = thin_svd(A).singular_values
    assert s[3] / s[0] <= 1e-10
    with pytest.raises(ValueError):
        thin_svd(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        thin_svd(np.ones(3))


def test_norm_examples():
    assert nuclear_norm(np.diag([3.0, 4.0])) == pytest.approx(7.0)
    Q = random_orthonormal(6, 6, seed=2)
    assert nuclear_norm(Q) == pytest.approx(6.0, rel=1e-12)
    assert spectral_norm(np.diag([3.0, 4.0])) == pytest.approx(4.0)
    assert numerical_rank(np.zeros((3, 3))) == 0


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_norm_ordering(m, n, seed):
    A = make_rng(seed).standard_normal((m, n))
    fro = np.linalg.norm(A)
    assert nuclear_norm(A) >= fro * (1 - 1e-12)
    assert fro >= spectral_norm(A) * (1 - 1e-12)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_nuclear_norm_matches_eigen_oracle(m, n, seed):
    A = make_rng(seed).standard_normal((m, n))
    # trace of sqrt of the smaller Gram matrix (the larger one has exact zero eigenvalues,
    # whose rounding errors would be amplified by the square root)
    G = A.T @ A if n <= m else A @ A.T
    w = np.linalg.eigvalsh(G)
    assert nuclear_norm(A) == pytest.approx(np.sum(np.sqrt(np.maximum(w, 0))), abs=1e-9)
    assert nuclear_norm(A) == pytest.approx(np.trace(scipy.linalg.sqrtm(G)).real, abs=1e-8)


def test_svt_examples():
    np.testing.assert_allclose(svt_shrink(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]), atol=1e-14)
    A = make_rng(3).standard_normal((5, 7))
    np.testing.assert_allclose(svt_shrink(A, 0.0), A, atol=1e-12)
    np.testing.assert_allclose(svt_shrink(A, 0.3, scale=2.5), 2.5 * svt_shrink(A, 0.3), atol=1e-12)
    with pytest.raises(ValueError):
        svt_shrink(A, -1.0)


def test_svt_prox_brute_force_2x2():
    # for diagonal inputs the prox is diagonal; scan a dense grid of diagonal candidates
    tau = 0.7
    A = np.diag([1.9, -0.4])
    grid = np.linspace(-2.5, 2.5, 1001)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    obj = tau * (np.abs(a) + np.abs(b)) + 0.5 * ((a - 1.9) ** 2 + (b + 0.4) ** 2)
    i, j = np.unravel_index(np.argmin(obj), obj.shape)
    Z = svt_shrink(A, tau)
    assert abs(Z[0, 0] - grid[i]) <= 5e-3 and abs(Z[1, 1] - grid[j]) <= 5e-3
    best = obj[i, j]
    assert tau * nuclear_norm(Z) + 0.5 * np.sum((Z - A) ** 2) <= best + 1e-12


def test_svt_prox_beats_perturbations():
    rng = make_rng(4)
    A = rng.standard_normal((2, 2))
    tau = 0.5
    Z = svt_shrink(A, tau)

    def f(M):
        return tau * nuclear_norm(M) + 0.5 * np.sum((M - A) ** 2)

    for _ in range(2000):
        assert f(Z) <= f(Z + 0.1 * rng.standard_normal((2, 2))) + 1e-12


@pytest.mark.parametrize("shape", [(6, 9), (4, 60), (60, 4)])
def test_svt_nonexpansive(shape):
    rng = make_rng(5)
    for _ in range(50):
        A, B = rng.standard_normal(shape), rng.standard_normal(shape)
        tau = rng.uniform(0, 3)
        assert np.linalg.norm(svt_shrink(A, tau) - svt_shrink(B, tau)) <= np.linalg.norm(A - B) + 1e-12


@pytest.mark.parametrize("shape", [(3, 40), (40, 3), (5, 200)])
def test_svt_gram_path_matches_svd(shape):
    A = make_rng(6).standard_normal(shape)
    svd = thin_svd(A)
    for tau in (0.0, 0.5, 2.0, 100.0):
        s = np.maximum(svd.singular_values - tau, 0)
        ref = (svd.U * s) @ svd.V.T
        np.testing.assert_allclose(svt_shrink(A, tau), ref, atol=1e-10)


def test_svt_partial_matches_full():
    rng = make_rng(7)
    A = rng.standard_normal((120, 3)) @ rng.standard_normal((3, 100)) + 0.01 * rng.standard_normal((120, 100))
    tau = 1.0
    full = svt_shrink(A, tau)
    out, above = svt_shrink_partial(A, tau, 6)
    assert above == 3
    np.testing.assert_allclose(out, full, atol=1e-9)
    out, above = svt_shrink_partial(A, tau, 2)
    assert above == 2  # truncated: caller must retry with a larger k


def test_random_orthonormal():
    U = random_orthonormal(10, 4, seed=1)
    np.testing.assert_allclose(U.T @ U, np.eye(4), atol=1e-12)
    np.testing.assert_array_equal(U, random_orthonormal(10, 4, seed=1))
    with pytest.raises(ValueError):
        random_orthonormal(3, 4, seed=0)


def test_random_orthonormal_column_means():
    rng = make_rng(8)
    draws = np.stack([random_orthonormal(5, 2, rng) for _ in range(10_000)])
    # each entry has mean 0 and variance 1/n under the Haar measure
    mean = draws.mean(axis=0)
    assert np.all(np.abs(mean) <= 3 * np.sqrt(1 / 5 / 10_000) * 1.5)


def test_random_gaussian():
    a = random_gaussian(100_000, seed=9)
    np.testing.assert_array_equal(a, random_gaussian(100_000, seed=9))
    assert not np.array_equal(a, random_gaussian(100_000, seed=10))
    n = a.size
    assert abs(a.mean()) <= 3 / np.sqrt(n)
    # Var of the sample variance of a standard normal is 2/(n-1)
    assert abs(a.var(ddof=1) - 1) <= 3 * np.sqrt(2 / (n - 1))
    assert random_gaussian((3, 4), seed=0).shape == (3, 4)


def test_generator_is_pcg64_and_portable():
    g = make_rng(12345)
    assert isinstance(g.bit_generator, np.random.PCG64)
    ref = np.random.Generator(np.random.PCG64(12345)).standard_normal(5)
    np.testing.assert_array_equal(g.standard_normal(5), ref)


def test_svd_result_reconstruct():
    res = SvdResult(np.eye(2), np.array([2.0, 1.0]), np.eye(2))
    np.testing.assert_array_equal(res.reconstruct(), np.diag([2.0, 1.0]))
    assert singular_values(np.zeros((0, 3))).size == 0
