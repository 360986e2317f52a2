import numpy as np
import pytest
from hypothesis import given, strategies as st

from clcs.errors import ConfigError
from clcs.priors import block_starts, lv, tv_1d, tv_1d_columns, tv_2d

from oracles import central_diff, rel_err


def test_tv1d_examples():
    assert tv_1d(np.full(6, 2.5)).value == 0.0
    assert tv_1d(np.array([0.0, 1, 0, 1])).value == pytest.approx(0.75)
    out = tv_1d(np.array([4.0]))
    assert out.value == 0.0 and not out.grad.any()


def test_tv2d_examples():
    assert tv_2d(np.full((5, 4), 0.3)).value == 0.0
    assert tv_2d(np.array([[0.0, 1], [1, 0]])).value == pytest.approx(2.0)


def test_tv2d_direct_sum():
    img = np.random.default_rng(0).random((5, 7))
    H, W = img.shape
    v = sum((img[i, j] - img[i + 1, j]) ** 2 for i in range(H - 1) for j in range(W)) / H
    h = sum((img[i, j] - img[i, j + 1]) ** 2 for i in range(H) for j in range(W - 1)) / W
    assert tv_2d(img).value == pytest.approx(v + h, rel=1e-13)


def test_lv_single_block():
    img = np.arange(9, dtype=float).reshape(3, 3)
    assert lv(img).value == pytest.approx(np.std(np.arange(9)), abs=1e-12)
    assert lv(img).value == pytest.approx(2.5820, abs=1e-4)


def test_lv_constant_and_errors():
    out = lv(np.full((9, 9), 0.7))
    assert out.value == 0.0 and not out.grad.any()
    with pytest.raises(ConfigError):
        lv(np.zeros((2, 5)))
    with pytest.raises(ConfigError):
        lv(np.zeros((9, 9)), window=3, stride=3)


def test_lv_block_oracle():
    img = np.random.default_rng(1).random((8, 10))
    rows, cols = block_starts(8, 3, 2), block_starts(10, 3, 2)
    assert rows.tolist() == [0, 2, 4, 5] and cols.tolist() == [0, 2, 4, 6, 7]
    vals = [np.std(img[i:i + 3, j:j + 3]) for i in rows for j in cols]
    assert lv(img).value == pytest.approx(np.mean(vals), rel=1e-13)


def test_lv_1d_oracle():
    x = np.random.default_rng(2).random(10)
    starts = block_starts(10, 3, 2)
    assert lv(x).value == pytest.approx(np.mean([np.std(x[i:i + 3]) for i in starts]), rel=1e-13)


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal(int(r.integers(2, 65)))
    assert rel_err(tv_1d(x).grad, central_diff(lambda v: tv_1d(v).value, x)) < 1e-6
    img = r.random((8, 8))
    assert rel_err(tv_2d(img).grad, central_diff(lambda v: tv_2d(v).value, img)) < 1e-6
    img = r.random((9, 9))
    assert rel_err(lv(img).grad, central_diff(lambda v: lv(v).value, img)) < 1e-5
    sig = r.random(16)
    assert rel_err(lv(sig).grad, central_diff(lambda v: lv(v).value, sig)) < 1e-5


def test_tv_columns_matches_tv_1d():
    X = np.random.default_rng(3).standard_normal((12, 4))
    vals, grad = tv_1d_columns(X)
    for j in range(4):
        one = tv_1d(X[:, j])
        assert vals[j] == pytest.approx(one.value, rel=1e-14)
        assert np.allclose(grad[:, j], one.grad, atol=1e-15)
    assert tv_1d(X).value == pytest.approx(vals.sum())


@given(st.integers(0, 10_000), st.floats(-10, 10), st.floats(-3, 3))
def test_priors_shift_invariant_and_scaling(seed, c, k):
    img = np.random.default_rng(seed).random((9, 11))
    for prior in (tv_2d, lv, lambda v: tv_1d(v[:, 0])):
        a, b = prior(img), prior(img + c)
        assert a.value >= 0
        assert b.value == pytest.approx(a.value, rel=1e-9, abs=1e-9)
        assert np.allclose(a.grad, b.grad, atol=1e-8)
    assert tv_2d(k * img).value == pytest.approx(k * k * tv_2d(img).value, rel=1e-9, abs=1e-12)
    assert lv(k * img).value == pytest.approx(abs(k) * lv(img).value, rel=1e-9, abs=1e-12)
