"""Reconstruction quality metrics: SSIM, PSNR, MSE and Pearson correlation.

SSIM follows Wang et al. (2004): Gaussian window of width 11 and sigma 1.5,
K1 = 0.01, K2 = 0.03, population (co)variances, averaged over the positions
where the window fits entirely inside the signal. 1D signals use the same
window along their only axis.

By default :func:`quality_report` rescales both arrays with the reference's
min-max range so every metric uses ``data_range = 1``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionError

WIN_SIZE = 11
WIN_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(x, x_hat):
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return x, x_hat


def mse(x, x_hat) -> float:
    x, x_hat = _pair(x, x_hat)
    return float(np.mean((x - x_hat) ** 2))


def psnr_from_mse(err: float, data_range: float = 1.0) -> float:
    if err == 0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / err)


def psnr(x, x_hat, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``inf``."""
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    return psnr_from_mse(mse(x, x_hat), data_range)


def pcc(x, x_hat) -> float:
    """Pearson correlation. Returns ``nan`` when either input is constant."""
    x, x_hat = _pair(x, x_hat)
    a = x.ravel() - x.mean()
    b = x_hat.ravel() - x_hat.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0:
        return math.nan
    return float(a @ b) / den


def gaussian_window(size: int = WIN_SIZE, sigma: float = WIN_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    w = np.exp(-0.5 * (r / sigma) ** 2)
    return w / w.sum()


def _filter_valid(a, w):
    # separable window, keep only positions where it fits completely
    half = (w.size - 1) // 2
    out = a
    for ax in range(a.ndim):
        out = correlate1d(out, w, axis=ax, mode="reflect")
    crop = tuple(slice(half, d - half) for d in a.shape)
    return out[crop]


def ssim(x, x_hat, data_range: float = 1.0, win_size: int = WIN_SIZE,
         sigma: float = WIN_SIGMA) -> float:
    """Mean structural similarity of two equally shaped 1D or 2D arrays.

    Arrays shorter than the window along any axis fall back to one global
    window (plain means and population variances over all samples).
    """
    x, x_hat = _pair(x, x_hat)
    if x.ndim not in (1, 2):
        raise DimensionError("ssim expects 1D or 2D input")
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    if min(x.shape) < win_size:
        mx, my = x.mean(), x_hat.mean()
        vx = np.mean((x - mx) ** 2)
        vy = np.mean((x_hat - my) ** 2)
        cxy = np.mean((x - mx) * (x_hat - my))
        num = (2 * mx * my + c1) * (2 * cxy + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        return float(num / den)
    w = gaussian_window(win_size, sigma)
    mx = _filter_valid(x, w)
    my = _filter_valid(x_hat, w)
    vx = _filter_valid(x * x, w) - mx * mx
    vy = _filter_valid(x_hat * x_hat, w) - my * my
    cxy = _filter_valid(x * x_hat, w) - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


@dataclass
class QualityReport:
    ssim: float
    psnr: float
    mse: float
    pcc: float

    def as_dict(self) -> dict:
        return {k: _json_number(v) for k, v in asdict(self).items()}


def _json_number(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def normalize_pair(x, x_hat):
    """Rescale both arrays by the reference's min-max range onto ``[0, 1]``."""
    x, x_hat = _pair(x, x_hat)
    lo = x.min()
    span = x.max() - lo
    if span == 0:
        span = 1.0
    return (x - lo) / span, (x_hat - lo) / span


def quality_report(x, x_hat, normalize: bool = True, data_range: float | None = None) -> QualityReport:
    """All four metrics for one signal or image.

    With ``normalize`` (default) ``data_range`` is 1; otherwise it defaults
    to the peak-to-peak range of ``x`` (or 1 for a constant ``x``).
    """
    x, x_hat = _pair(x, x_hat)
    if normalize:
        x, x_hat = normalize_pair(x, x_hat)
        data_range = 1.0
    elif data_range is None:
        data_range = float(np.ptp(x)) or 1.0
    err = mse(x, x_hat)
    return QualityReport(
        ssim=ssim(x, x_hat, data_range=data_range),
        psnr=psnr_from_mse(err, data_range),
        mse=err,
        pcc=pcc(x, x_hat),
    )


def batch_reports(X, X_hat, normalize: bool = True) -> list[QualityReport]:
    """Per-column reports for a batch of 1D signals stored as columns."""
    X, X_hat = _pair(X, X_hat)
    if X.ndim == 1:
        return [quality_report(X, X_hat, normalize)]
    return [quality_report(X[:, j], X_hat[:, j], normalize) for j in range(X.shape[1])]


def aggregate(reports) -> dict:
    """Mean, min, max and percentiles of each metric, ignoring missing values."""
    out = {}
    for key in ("ssim", "psnr", "mse", "pcc"):
        vals = np.array([getattr(r, key) for r in reports], dtype=float)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            out[key] = {"mean": None, "min": None, "max": None, "p10": None, "p50": None, "p90": None}
            continue
        finite = vals[np.isfinite(vals)]
        mean = float(vals.mean()) if finite.size == vals.size else math.inf
        pct = np.percentile(vals, [10, 50, 90]) if finite.size == vals.size else [math.nan] * 3
        out[key] = {
            "mean": _json_number(mean),
            "min": _json_number(float(vals.min())),
            "max": _json_number(float(vals.max())),
            "p10": _json_number(float(pct[0])),
            "p50": _json_number(float(pct[1])),
            "p90": _json_number(float(pct[2])),
        }
    return out
