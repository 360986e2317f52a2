"""Synthetic signals and images with a controlled sparse rate.

1D signals get K = round(Kr * n) DCT coefficients whose magnitudes, taken
in rank order, trace a Gaussian bump::

    g(i) = exp(-(i - K/8)^2 / (2 (K/4)^2)),   i = 0 .. K-1,  max g = 1

The largest 10% of magnitudes sit in the lowest 15% of frequencies, the
remainder are scattered over the other indices, and signs are random.
Small Gaussian noise is added to the upper half of the spectrum of ``x``
(not to the ground-truth coefficients).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError
from .sensing import SparseBasis, SparseCoefficients, column_sparse_rate, make_rng

log = logging.getLogger(__name__)

PROFILE_CENTER = 1 / 8
PROFILE_WIDTH = 1 / 4
DOMINANT_SHARE = 0.10
LOW_BAND = 0.15
DEFAULT_NOISE = 1e-3


@dataclass
class SyntheticSpec1D:
    n: int
    kr: float
    noise_level: float = DEFAULT_NOISE
    seed: int = 0

    @property
    def k(self) -> int:
        return int(round(self.kr * self.n))

    def validate(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"round(Kr * n) = {self.k} outside [1, {self.n}]")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be >= 0")


def gaussian_profile(k: int) -> np.ndarray:
    """Magnitudes by rank, peak normalised to 1."""
    i = np.arange(k)
    g = np.exp(-(i - PROFILE_CENTER * k) ** 2 / (2 * (PROFILE_WIDTH * k) ** 2))
    return g / g.max()


def generate_sparse_signal(spec: SyntheticSpec1D, D: SparseBasis | np.ndarray):
    """Return ``(x, s)`` where ``s`` has exactly ``K`` nonzeros and ``x = D (s + noise)``."""
    spec.validate()
    D = getattr(D, "D", D)
    n, k = spec.n, spec.k
    if D.shape != (n, n):
        raise ConfigError(f"basis is {D.shape}, expected ({n}, {n})")
    rng = make_rng(spec.seed)

    mags = np.sort(gaussian_profile(k))[::-1]
    n_dom = max(1, int(math.ceil(DOMINANT_SHARE * k)))
    low = int(math.ceil(LOW_BAND * n))
    n_dom_low = min(n_dom, low)
    dom_pos = rng.choice(low, size=n_dom_low, replace=False)
    rest = np.setdiff1d(np.arange(n), dom_pos)
    other_pos = rng.choice(rest, size=k - n_dom_low, replace=False)
    positions = np.concatenate([dom_pos, other_pos])

    values = np.zeros(n)
    signs = rng.choice([-1.0, 1.0], size=k)
    values[positions] = mags * signs
    s = SparseCoefficients(values, values != 0)

    coeffs = values.copy()
    if spec.noise_level > 0:
        hf = np.arange(n // 2, n)
        coeffs[hf] += spec.noise_level * rng.standard_normal(hf.size)
    return D @ coeffs, s


def generate_batch(n, kr, count, seed=0, noise_level=DEFAULT_NOISE, D=None):
    """``count`` signals as columns of ``X`` with per-signal seeds ``seed + j``."""
    from .sensing import build_dct_basis

    D = build_dct_basis(n) if D is None else D
    xs, ss = [], []
    for j in range(count):
        x, s = generate_sparse_signal(SyntheticSpec1D(n, kr, noise_level, seed + j), D)
        xs.append(x)
        ss.append(s.values)
    return np.stack(xs, axis=1), np.stack(ss, axis=1)


def piecewise_constant_signal(n, n_pieces, seed=0) -> np.ndarray:
    """Step signal with ``n_pieces`` random levels in [0, 1] at random breakpoints."""
    rng = make_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, n), size=n_pieces - 1, replace=False))
    levels = rng.uniform(0.0, 1.0, size=n_pieces)
    return np.repeat(levels, np.diff(np.concatenate([[0], cuts, [n]])))


def synthetic_scene(size=256, seed=0) -> np.ndarray:
    """Grayscale test scene in [0, 1]: shaded background, ellipses, bars and grain."""
    rng = make_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = 0.35 + 0.25 * xx - 0.15 * yy + 0.1 * np.sin(2 * np.pi * (1.5 * xx + yy))
    for _ in range(8):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        ry, rx = rng.uniform(0.05, 0.25, size=2)
        img[((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1] = rng.uniform(0, 1)
    for _ in range(4):
        y0, x0 = rng.uniform(0, 0.8, size=2)
        h, w = rng.uniform(0.03, 0.2, size=2)
        img[(yy >= y0) & (yy < y0 + h) & (xx >= x0) & (xx < x0 + w)] = rng.uniform(0, 1)
    img += 0.04 * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0)


def to_grayscale(img) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim == 3:
        # ITU-R BT.601 luma
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    if img.max() > 1.0:
        img = img / 255.0
    return img


def _area_weights(src: int, dst: int) -> np.ndarray:
    """``dst x src`` matrix averaging source cells by their overlap with each target cell."""
    edges_src = np.arange(src + 1)
    edges_dst = np.linspace(0, src, dst + 1)
    lo = np.maximum(edges_dst[:-1, None], edges_src[None, :-1])
    hi = np.minimum(edges_dst[1:, None], edges_src[None, 1:])
    W = np.clip(hi - lo, 0, None)
    return W / W.sum(axis=1, keepdims=True)


def area_resize(img, shape) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    H, W = shape
    return _area_weights(img.shape[0], H) @ img @ _area_weights(img.shape[1], W).T


@dataclass
class ImagePrepSpec:
    source: np.ndarray
    target_resolution: tuple
    target_kr: float
    smoothing_sigma: float | None = None  # None -> search
    tolerance: float = 0.03
    max_sigma: float = 20.0


@dataclass
class PreparedImage:
    image: np.ndarray
    sigma: float
    kr: float
    reached: bool
    info: dict = field(default_factory=dict)


def prepare_image(spec: ImagePrepSpec, D: SparseBasis | np.ndarray | None = None) -> PreparedImage:
    """Grayscale, area-resize, then smooth until the column sparse rate hits the target.

    The smoothing sigma is found by bisection (sparse rate falls as sigma
    grows). When the target lies outside what smoothing can reach the
    closest image is returned with ``reached=False``.
    """
    from .sensing import build_dct_basis

    H, W = spec.target_resolution
    if H < 8 or W < 8:
        raise ConfigError("target resolution must be at least 8x8")
    src = to_grayscale(spec.source)
    if src.shape[0] < H or src.shape[1] < W:
        raise ConfigError(f"source {src.shape} smaller than target {(H, W)}")
    base = np.clip(area_resize(src, (H, W)), 0.0, 1.0)
    D = build_dct_basis(H) if D is None else D

    def smooth(sigma):
        if sigma <= 0:
            return base
        return np.clip(gaussian_filter(base, sigma, mode="reflect"), 0.0, 1.0)

    def kr_of(sigma):
        return column_sparse_rate(smooth(sigma), D)

    if spec.smoothing_sigma is not None:
        sigma = float(spec.smoothing_sigma)
        kr = kr_of(sigma)
        return PreparedImage(smooth(sigma), sigma, kr, abs(kr - spec.target_kr) <= spec.tolerance)

    target, tol = spec.target_kr, spec.tolerance
    kr0 = kr_of(0.0)
    if kr0 <= target + tol:
        reached = abs(kr0 - target) <= tol
        if not reached:
            log.warning("sparse rate %.3f already below target %.3f", kr0, target)
        return PreparedImage(base, 0.0, kr0, reached)
    lo, hi = 0.0, spec.max_sigma
    kr_hi = kr_of(hi)
    if kr_hi > target + tol:
        log.warning("target sparse rate %.3f unreachable (floor %.3f)", target, kr_hi)
        return PreparedImage(smooth(hi), hi, kr_hi, False)
    best = (hi, kr_hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        kr = kr_of(mid)
        if abs(kr - target) < abs(best[1] - target):
            best = (mid, kr)
        if abs(kr - target) <= tol:
            break
        if kr > target:
            lo = mid
        else:
            hi = mid
    sigma, kr = best
    return PreparedImage(smooth(sigma), sigma, kr, abs(kr - target) <= tol)
