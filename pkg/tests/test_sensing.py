import numpy as np
import pytest
import scipy.fft
from hypothesis import given, strategies as st

from clcs.errors import ConfigError, DimensionError
from clcs.sensing import (SensingMatrix, SparseBasis, SparseCoefficients, build_dct_basis,
                          build_gaussian_sensing_matrix, column_sparse_rate, compose_setup,
                          compute_sparse_rate, make_setup, measure, measure_batch, residual)


def test_dct_n1_is_identity():
    assert build_dct_basis(1).D.tolist() == [[1.0]]


def test_dct_n0_rejected():
    with pytest.raises(DimensionError):
        build_dct_basis(0)


def test_dct_n4_orthonormal():
    D = build_dct_basis(4).D
    assert np.max(np.abs(D.T @ D - np.eye(4))) < 1e-12


@pytest.mark.parametrize("n", [2, 7, 64, 255, 1024])
def test_dct_orthonormal_and_matches_fft(n):
    D = build_dct_basis(n).D
    assert np.max(np.abs(D.T @ D - np.eye(n))) < 1e-10
    # analysis with D.T equals scipy's orthonormal DCT-II
    oracle = scipy.fft.dct(np.eye(n), type=2, norm="ortho", axis=0)
    assert np.allclose(D.T, oracle, atol=1e-12)


def test_constant_signal_has_only_dc():
    D = build_dct_basis(8).D
    s = D.T @ np.full(8, 3.0)
    nz = np.flatnonzero(np.abs(s) > 1e-12)
    assert nz.tolist() == [0]


def test_sensing_shape_and_rate_error():
    assert build_gaussian_sensing_matrix(10, 0.5, 0).M.shape == (5, 10)
    with pytest.raises(ConfigError):
        build_gaussian_sensing_matrix(10, 0.05, 0)


def test_sensing_determinism():
    a = build_gaussian_sensing_matrix(100, 0.25, 42).M
    b = build_gaussian_sensing_matrix(100, 0.25, 42).M
    c = build_gaussian_sensing_matrix(100, 0.25, 43).M
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_sensing_column_norms():
    M = build_gaussian_sensing_matrix(1000, 0.3, 5).M
    mean_norm = np.mean(np.linalg.norm(M, axis=0))
    assert abs(mean_norm - 1) < 0.1


def test_sensing_stream_is_pinned():
    # guards against silent changes of the generator behind a seed
    M = build_gaussian_sensing_matrix(4, 0.5, 2024).M
    ref = np.random.Generator(np.random.PCG64(2024)).standard_normal((2, 4)) / np.sqrt(2)
    assert M.tobytes() == ref.tobytes()


def test_compose_identity_basis():
    M = build_gaussian_sensing_matrix(6, 0.5, 1)
    setup = compose_setup(M, np.eye(6))
    assert np.array_equal(setup.A, M.M)
    assert setup.basis.kind == "custom"


def test_compose_hand_product():
    M = np.arange(8, dtype=float).reshape(2, 4)
    D = build_dct_basis(4).D
    A = compose_setup(M, D).A
    oracle = [[sum(M[i, k] * D[k, j] for k in range(4)) for j in range(4)] for i in range(2)]
    assert np.allclose(A, oracle, atol=1e-12)


def test_compose_permutation_gives_orthonormal_rows():
    P = np.eye(5)[[3, 0, 4, 1, 2]]
    A = compose_setup(P, build_dct_basis(5)).A
    assert np.allclose(A @ A.T, np.eye(5), atol=1e-12)


def test_compose_shape_mismatch():
    with pytest.raises(DimensionError):
        compose_setup(np.ones((2, 5)), build_dct_basis(4))


def test_measure_basic_cases(rng):
    setup = make_setup(5, 0.6, 0)
    assert np.array_equal(measure(setup, np.zeros(5)).y, np.zeros(3))
    ident = compose_setup(np.eye(5), build_dct_basis(5))
    x = rng.standard_normal(5)
    assert np.array_equal(measure(ident, x).y, x)
    x = rng.standard_normal(5)
    oracle = [sum(setup.M[i, j] * x[j] for j in range(5)) for i in range(3)]
    assert np.allclose(measure(setup, x).y, oracle, atol=1e-14)
    with pytest.raises(DimensionError):
        measure(setup, np.zeros(4))


def test_measure_noise_is_seeded(rng):
    setup = make_setup(20, 0.5, 0)
    x = rng.standard_normal(20)
    a = measure(setup, x, 0.1, seed=3).y
    b = measure(setup, x, 0.1, seed=3).y
    assert np.array_equal(a, b)
    assert not np.allclose(a, setup.M @ x)


def test_measure_batch_columnwise(rng):
    setup = make_setup(4, 0.75, 1)
    X = rng.standard_normal((4, 3))
    Y = measure_batch(setup, X).y
    for j in range(3):
        assert np.max(np.abs(Y[:, j] - measure(setup, X[:, j]).y)) < 1e-14
    one = measure_batch(setup, X[:, :1]).y
    assert np.allclose(one[:, 0], measure(setup, X[:, 0]).y, atol=1e-15)
    dup = measure_batch(setup, np.stack([X[:, 0], X[:, 0]], axis=1)).y
    assert np.array_equal(dup[:, 0], dup[:, 1])


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_measure_is_linear(alpha, beta, seed):
    r = np.random.default_rng(seed)
    setup = make_setup(16, 0.5, seed)
    x1, x2 = r.standard_normal(16), r.standard_normal(16)
    lhs = measure(setup, alpha * x1 + beta * x2).y
    rhs = alpha * measure(setup, x1).y + beta * measure(setup, x2).y
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, abs(alpha) + abs(beta)) * 10


def test_residual_cases(rng):
    setup = make_setup(10, 0.5, 2)
    y = rng.standard_normal(5)
    assert np.array_equal(residual(setup, np.zeros(10), y), -y)
    s = rng.standard_normal(10)
    assert np.max(np.abs(residual(setup, SparseCoefficients(s), setup.A @ s))) < 1e-12
    mask = np.ones(10, dtype=bool)
    mask[3] = False
    coeffs = SparseCoefficients(s, mask)
    s_eff = s.copy()
    s_eff[3] = 0.0
    assert np.allclose(residual(setup, coeffs, y), setup.A @ s_eff - y, atol=1e-14)
    with pytest.raises(DimensionError):
        residual(setup, np.zeros(9), y)


def _sparse_rate_oracle(s, frac):
    mags = sorted(np.abs(s), reverse=True)
    total = sum(mags)
    acc = 0.0
    for i, v in enumerate(mags, start=1):
        acc += v
        if acc >= frac * total:
            return i / len(s)


def test_sparse_rate_examples():
    n = 100
    D = build_dct_basis(n)
    s = np.zeros(n)
    s[17] = 2.0
    assert compute_sparse_rate(D.D @ s, D) == pytest.approx(0.01)
    D4 = build_dct_basis(4)
    s = np.array([10, 0.1, 0.1, 0.1])
    assert compute_sparse_rate(D4.D @ s, D4) == _sparse_rate_oracle(s, 0.98) == 0.5
    assert compute_sparse_rate(D.D @ np.ones(n), D) == pytest.approx(0.98)
    assert compute_sparse_rate(np.zeros(n), D) == 0.0


@given(st.integers(0, 10_000), st.floats(0.01, 100) | st.floats(-100, -0.01))
def test_sparse_rate_scale_invariant(seed, c):
    D = build_dct_basis(32)
    x = np.random.default_rng(seed).standard_normal(32)
    assert compute_sparse_rate(c * x, D) == compute_sparse_rate(x, D)


@given(st.integers(0, 10_000))
def test_sparse_rate_matches_oracle(seed):
    D = build_dct_basis(24)
    r = np.random.default_rng(seed)
    s = r.standard_normal(24) * (r.random(24) < 0.4)
    if not s.any():
        s[0] = 1.0
    assert compute_sparse_rate(D.D @ s, D) == pytest.approx(_sparse_rate_oracle(D.D.T @ (D.D @ s), 0.98))


def test_column_sparse_rate_is_mean_of_columns(rng):
    D = build_dct_basis(16)
    X = rng.standard_normal((16, 5))
    assert column_sparse_rate(X, D) == pytest.approx(np.mean([compute_sparse_rate(c, D) for c in X.T]))


def test_fingerprint_tracks_matrix():
    a = make_setup(32, 0.5, 1)
    assert a.fingerprint() == make_setup(32, 0.5, 1).fingerprint()
    assert a.fingerprint() != make_setup(32, 0.5, 2).fingerprint()


def test_types():
    assert SparseBasis(np.eye(3)).n == 3
    assert SensingMatrix(np.ones((2, 3))).m == 2
    with pytest.raises(DimensionError):
        SparseCoefficients(np.zeros(3), np.ones(2, dtype=bool))
