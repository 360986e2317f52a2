"""Smoothness priors on signals and images, each returning value and gradient.

TV-1D   (1/n) sum_j (x_j - x_{j+1})^2
TV-2D   (1/H) sum (I_ij - I_{i+1,j})^2 + (1/W) sum (I_ij - I_{i,j+1})^2
LV      mean over sliding blocks of the population standard deviation
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConfigError

# std below this is treated as a constant block (zero subgradient)
_STD_FLOOR = 1e-12


class PriorValueAndGrad(NamedTuple):
    value: float
    grad: np.ndarray


def tv_1d(x) -> PriorValueAndGrad:
    """Total variation of a signal along axis 0.

    For an ``(n, a)`` array the per-column values are summed, which is the
    batch form used when columns are independent signals. Signals shorter
    than two samples have zero variation.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    grad = np.zeros_like(x)
    if n < 2:
        return PriorValueAndGrad(0.0, grad)
    d = x[:-1] - x[1:]
    value = float(np.sum(d * d)) / n
    g = (2.0 / n) * d
    grad[:-1] += g
    grad[1:] -= g
    return PriorValueAndGrad(value, grad)


def tv_1d_columns(X):
    """Per-column TV-1D values of an ``(n, a)`` array and the gradient."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    grad = np.zeros_like(X)
    if n < 2:
        return np.zeros(X.shape[1:]), grad
    d = X[:-1] - X[1:]
    g = (2.0 / n) * d
    grad[:-1] += g
    grad[1:] -= g
    return np.sum(d * d, axis=0) / n, grad


def tv_2d(img) -> PriorValueAndGrad:
    """Anisotropic TV of an ``H x W`` image with separate 1/H and 1/W weights.

    Both difference terms run over the whole valid grid. Images with a side
    shorter than 2 contribute nothing along that side.
    """
    img = np.asarray(img, dtype=float)
    H, W = img.shape
    grad = np.zeros_like(img)
    value = 0.0
    if H >= 2:
        dv = img[:-1, :] - img[1:, :]
        value += float(np.sum(dv * dv)) / H
        gv = (2.0 / H) * dv
        grad[:-1, :] += gv
        grad[1:, :] -= gv
    if W >= 2:
        dh = img[:, :-1] - img[:, 1:]
        value += float(np.sum(dh * dh)) / W
        gh = (2.0 / W) * dh
        grad[:, :-1] += gh
        grad[:, 1:] -= gh
    return PriorValueAndGrad(value, grad)


def block_starts(length: int, window: int, stride: int) -> np.ndarray:
    """Window start offsets covering ``[0, length)``.

    Regular strides from 0; when they do not land on the far edge an extra
    window flush with the edge is appended.
    """
    starts = list(range(0, length - window + 1, stride))
    if starts[-1] != length - window:
        starts.append(length - window)
    return np.asarray(starts)


def lv(img, window: int = 3, stride: int = 2) -> PriorValueAndGrad:
    """Local variation: mean population std over sliding blocks.

    Accepts 2D images (square ``window x window`` blocks) and 1D signals
    (length-``window`` segments).
    """
    img = np.asarray(img, dtype=float)
    if window < 1 or stride < 1:
        raise ConfigError("window and stride must be positive")
    if stride >= window:
        raise ConfigError(f"stride ({stride}) must be smaller than window ({window})")
    if any(d < window for d in img.shape):
        raise ConfigError(f"window {window} exceeds image dimensions {img.shape}")
    if img.ndim == 1:
        return PriorValueAndGrad(*_lv_1d(img, window, stride))
    if img.ndim != 2:
        raise ConfigError("lv expects a 1D signal or a 2D image")

    rows = block_starts(img.shape[0], window, stride)
    cols = block_starts(img.shape[1], window, stride)
    view = np.lib.stride_tricks.sliding_window_view(img, (window, window))
    blocks = view[np.ix_(rows, cols)]  # (br, bc, w, w)
    N = window * window
    mu = blocks.mean(axis=(2, 3), keepdims=True)
    dev = blocks - mu
    std = np.sqrt(np.sum(dev * dev, axis=(2, 3), keepdims=True) / N)
    nblocks = rows.size * cols.size
    value = float(std.sum()) / nblocks

    safe = np.where(std > _STD_FLOOR, std, np.inf)
    gblocks = dev / (N * safe) / nblocks
    grad = np.zeros_like(img)
    # window starts are distinct, so each offset scatters to distinct pixels
    for di in range(window):
        for dj in range(window):
            grad[np.ix_(rows + di, cols + dj)] += gblocks[:, :, di, dj]
    return PriorValueAndGrad(value, grad)


def _lv_1d(x, window, stride):
    starts = block_starts(x.shape[0], window, stride)
    segs = np.lib.stride_tricks.sliding_window_view(x, window)[starts]
    dev = segs - segs.mean(axis=1, keepdims=True)
    std = np.sqrt(np.sum(dev * dev, axis=1, keepdims=True) / window)
    value = float(std.sum()) / starts.size
    safe = np.where(std > _STD_FLOOR, std, np.inf)
    gsegs = dev / (window * safe) / starts.size
    grad = np.zeros_like(x)
    for k in range(window):
        grad[starts + k] += gsegs[:, k]
    return value, grad
