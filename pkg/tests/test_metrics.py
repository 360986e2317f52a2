import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from skimage.metrics import structural_similarity

from clcs.errors import DimensionError
from clcs.metrics import (aggregate, batch_reports, mse, normalize_pair, pcc, psnr,
                          psnr_from_mse, quality_report, ssim)


def reference_ssim(a, b):
    kw = dict(gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=1.0)
    if a.ndim == 1:
        # the reference works on images; a 1D signal is an 11-row stack of
        # itself, whose valid region along the stacked axis is a single row
        return structural_similarity(np.tile(a, (11, 1)), np.tile(b, (11, 1)), **kw)
    return structural_similarity(a, b, **kw)


def test_mse_examples():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse([0.0, 0.0], [0.1, 0.1]) == pytest.approx(0.01)
    with pytest.raises(DimensionError):
        mse([1.0], [1.0, 2.0])


def test_mse_loop_oracle(rng):
    a, b = rng.standard_normal(37), rng.standard_normal(37)
    acc = 0.0
    for u, v in zip(a, b):
        acc += (u - v) ** 2
    assert mse(a, b) == pytest.approx(acc / 37, rel=1e-13)


def test_psnr_examples():
    assert psnr_from_mse(0.01) == pytest.approx(20.0)
    assert psnr([0.2, 0.4], [0.2, 0.4]) == math.inf


def test_pcc_examples(rng):
    x = rng.standard_normal(20)
    assert pcc(x, 2 * x + 3) == pytest.approx(1.0, abs=1e-12)
    assert pcc(x, -x) == pytest.approx(-1.0, abs=1e-12)
    assert math.isnan(pcc(np.ones(5), x[:5]))
    y = rng.standard_normal(20)
    xm, ym = x - x.mean(), y - y.mean()
    oracle = sum(xm * ym) / math.sqrt(sum(xm * xm) * sum(ym * ym))
    assert abs(pcc(x, y) - oracle) < 1e-12


def test_ssim_basic(rng):
    img = rng.random((20, 20))
    assert ssim(img, img) == pytest.approx(1.0)
    assert ssim(img, img + 0.3) < 1.0


@pytest.mark.parametrize("shape", [(32, 32), (64, 40), (11, 11), (100,), (57,)])
def test_ssim_matches_reference(shape):
    r = np.random.default_rng(sum(shape))
    a = r.random(shape)
    b = np.clip(a + 0.1 * r.standard_normal(shape), 0, 1)
    assert abs(ssim(a, b) - reference_ssim(a, b)) < 1e-6


def test_ssim_short_signal_global_window():
    a = np.array([0.1, 0.5, 0.9, 0.3])
    b = np.array([0.2, 0.4, 0.8, 0.3])
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    mx, my = a.mean(), b.mean()
    vx, vy = a.var(), b.var()
    cxy = np.mean((a - mx) * (b - my))
    oracle = (2 * mx * my + c1) * (2 * cxy + c2) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2))
    assert ssim(a, b) == pytest.approx(oracle, rel=1e-12)


@given(st.integers(0, 10_000))
def test_ssim_symmetric(seed):
    r = np.random.default_rng(seed)
    a, b = r.random((16, 13)), r.random((16, 13))
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-12


@given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(-5, 5))
def test_pcc_affine_invariance(seed, scale, shift):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal(30), r.standard_normal(30)
    assert abs(pcc(scale * a + shift, b) - pcc(a, b)) < 1e-12
    assert abs(pcc(a, scale * b + shift) - pcc(a, b)) < 1e-12


@given(st.integers(0, 10_000))
def test_report_identities(seed):
    r = np.random.default_rng(seed)
    a = r.random(40)
    b = a + 0.05 * r.standard_normal(40)
    rep = quality_report(a, b)
    assert abs(rep.psnr - psnr_from_mse(rep.mse)) < 1e-9
    assert (mse(a, b) == 0) == np.array_equal(a, b)


def test_normalization_uses_reference_range():
    x = np.array([2.0, 4.0, 6.0])
    xn, xhn = normalize_pair(x, x + 1.0)
    assert xn.tolist() == [0.0, 0.5, 1.0]
    assert xhn.tolist() == [0.25, 0.75, 1.25]
    assert quality_report(x, x + 1.0).mse == pytest.approx(0.0625)
    raw = quality_report(x, x + 1.0, normalize=False)
    assert raw.mse == pytest.approx(1.0)


def test_batch_and_aggregate(rng):
    X = rng.random((30, 4))
    Xh = X + 0.01 * rng.standard_normal((30, 4))
    reps = batch_reports(X, Xh)
    assert len(reps) == 4
    agg = aggregate(reps)
    assert agg["ssim"]["mean"] == pytest.approx(np.mean([r.ssim for r in reps]))
    assert agg["mse"]["min"] <= agg["mse"]["p50"] <= agg["mse"]["max"]
    d = quality_report(X[:, 0], X[:, 0]).as_dict()
    assert d["psnr"] == "inf"
    assert quality_report(np.ones(5), np.ones(5)).as_dict()["pcc"] is None
