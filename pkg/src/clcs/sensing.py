"""Measurement model ``y = M x + xi = M D s + xi = A s + xi``.

Random matrices come from numpy's PCG64 bit generator
(``np.random.default_rng(seed)``), whose stream is fixed across platforms
for a given seed. The sparse basis is the orthonormal DCT-II.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError


def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator; the single source of randomness in the package."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SparseBasis:
    D: np.ndarray
    kind: str = "dct2"

    @property
    def n(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class SensingMatrix:
    M: np.ndarray
    seed: Optional[int] = None
    sr: Optional[float] = None

    @property
    def m(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class Measurement:
    """Measurements, shape ``(m,)`` or ``(m, a)`` for a column batch."""

    y: np.ndarray
    noise_level: float = 0.0


@dataclass
class SparseCoefficients:
    """Coefficient values with their binary support mask.

    Only ``values * mask`` is meaningful; ``effective`` returns it.
    """

    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.mask is None:
            self.mask = np.ones(self.values.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.values.shape:
            raise DimensionError(
                f"mask shape {self.mask.shape} != values shape {self.values.shape}")

    @property
    def effective(self) -> np.ndarray:
        return np.where(self.mask, self.values, 0.0)


@dataclass(frozen=True)
class MeasurementSetup:
    sensing: SensingMatrix
    basis: SparseBasis
    A: np.ndarray = field(repr=False)

    @property
    def M(self) -> np.ndarray:
        return self.sensing.M

    @property
    def D(self) -> np.ndarray:
        return self.basis.D

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def sr(self) -> float:
        return self.m / self.n

    def fingerprint(self) -> str:
        """Short hash identifying the sensing operator (used for provenance)."""
        h = hashlib.sha256()
        h.update(f"{self.n}x{self.m}:{self.basis.kind}".encode())
        h.update(np.ascontiguousarray(self.M, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


def build_dct_basis(n: int) -> SparseBasis:
    """Orthonormal DCT-II synthesis matrix ``D`` so that ``x = D s``, ``s = D.T x``.

    Column ``k`` is ``c_k cos(pi (2j + 1) k / (2n))`` with ``c_0 = sqrt(1/n)``
    and ``c_k = sqrt(2/n)`` otherwise, so column 0 is constant.
    """
    if int(n) < 1:
        raise DimensionError(f"basis dimension must be >= 1, got {n}")
    n = int(n)
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    D = np.cos(np.pi * (2 * j + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    D[:, 0] = np.sqrt(1.0 / n)
    return SparseBasis(D)


def measurement_count(n: int, sr: float) -> int:
    return int(np.floor(n * sr + 1e-9))


def build_gaussian_sensing_matrix(n: int, sr: float, seed) -> SensingMatrix:
    """``m x n`` matrix with i.i.d. N(0, 1/m) entries, ``m = floor(n * sr)``."""
    if not 0 < sr <= 1:
        raise ConfigError(f"sampling rate must lie in (0, 1], got {sr}")
    m = measurement_count(n, sr)
    if m < 1:
        raise ConfigError(f"floor({n} * {sr}) = 0 measurements")
    rng = make_rng(seed)
    M = rng.standard_normal((m, n)) / np.sqrt(m)
    return SensingMatrix(M, seed=seed, sr=sr)


def compose_setup(M: SensingMatrix | np.ndarray, D: SparseBasis | np.ndarray) -> MeasurementSetup:
    if not isinstance(M, SensingMatrix):
        M = SensingMatrix(np.asarray(M, dtype=float))
    if not isinstance(D, SparseBasis):
        D = SparseBasis(np.asarray(D, dtype=float), kind="custom")
    if M.M.shape[1] != D.n:
        raise DimensionError(
            f"sensing matrix has {M.M.shape[1]} columns but basis dimension is {D.n}")
    return MeasurementSetup(M, D, M.M @ D.D)


def make_setup(n: int, sr: float, seed) -> MeasurementSetup:
    """Gaussian sensing matrix composed with the DCT basis."""
    return compose_setup(build_gaussian_sensing_matrix(n, sr, seed), build_dct_basis(n))


def measure(setup: MeasurementSetup, x, noise_level: float = 0.0, seed=None) -> Measurement:
    """``y = M x + xi`` with ``xi ~ N(0, noise_level^2)`` i.i.d.

    Works for a single signal ``(n,)`` and for column batches ``(n, a)``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != setup.n or x.ndim > 2:
        raise DimensionError(f"signal length {x.shape[0]} != setup n={setup.n}")
    if noise_level < 0:
        raise ConfigError("noise_level must be >= 0")
    y = setup.M @ x
    if noise_level > 0:
        y = y + noise_level * make_rng(seed).standard_normal(y.shape)
    return Measurement(y, float(noise_level))


def measure_batch(setup: MeasurementSetup, X, noise_level: float = 0.0, seed=None) -> Measurement:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("batch must be an (n, a) matrix")
    return measure(setup, X, noise_level, seed)


def residual(setup: MeasurementSetup, s, y) -> np.ndarray:
    """``A (values * mask) - y``."""
    if isinstance(s, SparseCoefficients):
        s = s.effective
    y = getattr(y, "y", y)
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if s.shape[0] != setup.n or y.shape[0] != setup.m or s.shape[1:] != y.shape[1:]:
        raise DimensionError(f"shapes s{s.shape}, y{y.shape} incompatible with A{setup.A.shape}")
    return setup.A @ s - y


def compute_sparse_rate(x, D, energy_fraction: float = 0.98) -> float:
    """Fraction of DCT coefficients needed to reach ``energy_fraction`` of sum |s|.

    Coefficient magnitudes are sorted in descending order and accumulated;
    the 1-based position where the running sum first reaches the fraction of
    the total, divided by ``n``, is returned. An all-zero signal gives 0.
    """
    if not 0 < energy_fraction <= 1:
        raise ConfigError("energy_fraction must lie in (0, 1]")
    D = getattr(D, "D", D)
    x = np.asarray(x, dtype=float)
    mags = np.sort(np.abs(D.T @ x))[::-1]
    total = mags.sum()
    if total == 0:
        return 0.0
    cum = np.cumsum(mags)
    # relative slack so that exactly-equal shares are not lost to rounding
    idx = int(np.searchsorted(cum, energy_fraction * total * (1 - 1e-12)))
    return (idx + 1) / x.shape[0]


def column_sparse_rate(X, D, energy_fraction: float = 0.98) -> float:
    """Mean sparse rate over the columns of an image or signal batch."""
    D = getattr(D, "D", D)
    X = np.asarray(X, dtype=float)
    mags = -np.sort(-np.abs(D.T @ X), axis=0)
    total = mags.sum(axis=0)
    cum = np.cumsum(mags, axis=0)
    reached = cum >= energy_fraction * total * (1 - 1e-12)
    rates = (np.argmax(reached, axis=0) + 1) / X.shape[0]
    return float(np.mean(np.where(total > 0, rates, 0.0)))
