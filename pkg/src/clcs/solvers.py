"""Baseline sparse solvers: multi-atom OMP, IHT and ISTA.

All three solve ``y = A s`` for a sparse ``s`` and stop when the residual
norm drops below ``eps``, when progress stalls, or after ``R`` iterations.
ISTA takes gradient steps of size ``t / ||A||_2^2`` on ``0.5 ||A s - y||^2``,
so ``t = 1`` is the usual safe step. IHT uses the same fixed step or, by
default, the normalised (adaptive) step of Blumensath and Davies, which
picks the exact line-search step on the current support and backtracks
when the support changes.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError, DivergenceError
from .sensing import MeasurementSetup, SparseCoefficients

DIVERGENCE_NORM = 1e12
STAGNATION_TOL = 1e-7
STAGNATION_PATIENCE = 5


@dataclass
class OmpConfig:
    th: float = 0.7
    max_iter: int = 200
    eps: float = 1e-6

    def validate(self):
        if not 0 < self.th <= 1:
            raise ConfigError("th must lie in (0, 1]")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")


IHT_STEPS = ("adaptive", "fixed")
BACKTRACK_KAPPA = 2.0
BACKTRACK_C = 0.01


@dataclass
class IhtConfig:
    k: int = 1
    t: float = 1.0  # scales the step in both modes
    max_iter: int = 200
    eps: float = 1e-6
    step: str = "adaptive"

    @classmethod
    def from_kr(cls, kr: float, n: int, **kw):
        return cls(k=max(1, int(round(kr * n))), **kw)

    def validate(self, n):
        if not 1 <= self.k <= n:
            raise ConfigError(f"k must lie in [1, {n}]")
        if self.t <= 0:
            raise ConfigError("t must be > 0")
        if self.max_iter < 1 or self.eps <= 0:
            raise ConfigError("max_iter must be >= 1 and eps > 0")
        if self.step not in IHT_STEPS:
            raise ConfigError(f"step must be one of {IHT_STEPS}")


@dataclass
class IstaConfig:
    lam: float | None = None  # None -> 1e-3 * max|A^T y|
    t: float = 1.0
    max_iter: int = 200
    eps: float = 1e-6

    def validate(self):
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.t <= 0:
            raise ConfigError("t must be > 0")
        if self.max_iter < 1 or self.eps <= 0:
            raise ConfigError("max_iter must be >= 1 and eps > 0")


@dataclass
class SolveResult:
    s: SparseCoefficients
    x_hat: np.ndarray
    iterations: int | np.ndarray
    final_residual_norm: float | np.ndarray
    wall_time: float
    info: dict = field(default_factory=dict)


def config_dict(cfg) -> dict:
    return asdict(cfg)


def _y_array(y):
    return np.asarray(getattr(y, "y", y), dtype=float)


def select_support(A, r, th: float) -> np.ndarray:
    """Positions whose normalised correlation ``|A^T r| / max|A^T r|`` is ``>= th``.

    The argmax is always included. A zero residual (or zero correlation)
    yields an all-false mask, which callers treat as convergence.
    """
    return _threshold_correlations(np.abs(A.T @ r), th)


def _threshold_correlations(c, th):
    peak = c.max(axis=0)
    if c.ndim == 1:
        if not peak > 0:
            return np.zeros(c.shape, dtype=bool)
        sel = c >= th * peak
        sel[np.argmax(c)] = True
        return sel
    sel = c >= th * peak
    sel[np.argmax(c, axis=0), np.arange(c.shape[1])] = True
    sel[:, ~(peak > 0)] = False
    return sel


def solve_support_ls(A, y, mask) -> SparseCoefficients:
    """Least squares restricted to the columns selected by ``mask``.

    Uses a pivoted QR (LAPACK ``gelsy``), which returns the minimum-norm
    solution when the selected columns are rank deficient.
    """
    mask = np.asarray(mask, dtype=bool)
    k = int(mask.sum())
    if k < 1:
        raise ConfigError("support is empty")
    if k > A.shape[0]:
        raise DimensionError(f"support size {k} exceeds measurement count {A.shape[0]}")
    sub, *_ = scipy.linalg.lstsq(A[:, mask], y, lapack_driver="gelsy", check_finite=False)
    values = np.zeros(A.shape[1])
    values[mask] = sub
    return SparseCoefficients(values, mask.copy())


def _omp_single(A, y, cfg: OmpConfig):
    m, n = A.shape
    mask = np.zeros(n, dtype=bool)
    values = np.zeros(n)
    r = y.copy()
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    it = 0
    while it < cfg.max_iter and rnorm >= cfg.eps:
        corr = np.abs(A.T @ r)
        new = _threshold_correlations(corr, cfg.th) & ~mask
        room = m - int(mask.sum())
        if room <= 0 or not new.any():
            break
        if new.sum() > room:
            idx = np.flatnonzero(new)
            keep = idx[np.argsort(-corr[idx], kind="stable")[:room]]
            new[:] = False
            new[keep] = True
        mask |= new
        values = solve_support_ls(A, y, mask).values
        r = y - A @ values
        it += 1
        new_norm = float(np.linalg.norm(r))
        # least squares on a superset can only shrink the residual
        rnorm = min(new_norm, rnorm)
        history.append(new_norm)
    return values, mask, it, float(np.linalg.norm(y - A @ values)), history


def omp_reconstruct(setup: MeasurementSetup, y, cfg: OmpConfig | None = None) -> SolveResult:
    """Multi-atom OMP: grow the support by every atom with normalised correlation >= th.

    Each iteration refits all coefficients on the accumulated support. The
    support never exceeds ``m`` atoms. Column batches ``(m, a)`` are solved
    column by column.
    """
    cfg = cfg or OmpConfig()
    cfg.validate()
    Y = _y_array(y)
    A = setup.A
    if Y.shape[0] != setup.m:
        raise DimensionError(f"measurement length {Y.shape[0]} != m={setup.m}")
    t0 = time.perf_counter()
    if Y.ndim == 1:
        values, mask, it, rn, hist = _omp_single(A, Y, cfg)
        wall = time.perf_counter() - t0
        return SolveResult(SparseCoefficients(values, mask), setup.D @ values, it, rn, wall,
                           {"solver": "omp", "residual_history": hist})
    cols = [_omp_single(A, Y[:, j], cfg) for j in range(Y.shape[1])]
    values = np.stack([c[0] for c in cols], axis=1)
    mask = np.stack([c[1] for c in cols], axis=1)
    wall = time.perf_counter() - t0
    return SolveResult(SparseCoefficients(values, mask), setup.D @ values,
                       np.array([c[2] for c in cols]), np.array([c[3] for c in cols]), wall,
                       {"solver": "omp"})


def hard_threshold(s, k: int) -> np.ndarray:
    """Keep the ``k`` largest-magnitude entries; ties go to the lower index."""
    s = np.asarray(s, dtype=float)
    if not 1 <= k <= s.shape[0]:
        raise ConfigError(f"k must lie in [1, {s.shape[0]}]")
    order = np.argsort(-np.abs(s), kind="stable")
    out = np.zeros_like(s)
    keep = order[:k]
    out[keep] = s[keep]
    return out


def soft_threshold(v, lam: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def spectral_norm_sq(A) -> float:
    return float(np.linalg.norm(A, 2) ** 2)


def _iterate(A, y, update, max_iter, eps, name):
    """Shared loop for the thresholding solvers."""
    s = np.zeros(A.shape[1])
    r = y - A @ s
    rnorm = float(np.linalg.norm(r))
    it = 0
    stall = 0
    while it < max_iter and rnorm >= eps:
        s = update(s, r)
        snorm = float(np.linalg.norm(s))
        if not np.isfinite(snorm) or snorm > DIVERGENCE_NORM:
            raise DivergenceError(f"{name} iterates diverged (|s| = {snorm:.3g}); use a smaller t")
        r = y - A @ s
        new = float(np.linalg.norm(r))
        it += 1
        if abs(rnorm - new) <= STAGNATION_TOL * max(rnorm, 1e-300):
            stall += 1
        else:
            stall = 0
        rnorm = new
        if stall >= STAGNATION_PATIENCE:
            break
    return s, it, rnorm


def _run_columns(setup, y, solve_one, name):
    Y = _y_array(y)
    if Y.shape[0] != setup.m:
        raise DimensionError(f"measurement length {Y.shape[0]} != m={setup.m}")
    t0 = time.perf_counter()
    if Y.ndim == 1:
        s, it, rn = solve_one(Y)
        wall = time.perf_counter() - t0
        return SolveResult(SparseCoefficients(s, s != 0), setup.D @ s, it, rn, wall, {"solver": name})
    cols = [solve_one(Y[:, j]) for j in range(Y.shape[1])]
    S = np.stack([c[0] for c in cols], axis=1)
    wall = time.perf_counter() - t0
    return SolveResult(SparseCoefficients(S, S != 0), setup.D @ S,
                       np.array([c[1] for c in cols]), np.array([c[2] for c in cols]), wall,
                       {"solver": name})


def _adaptive_iht_update(A, k, t):
    """Normalised IHT step as a closure over the current support."""
    supp = None

    def update(s, r):
        nonlocal supp
        g = A.T @ r
        if supp is None:
            supp = np.argsort(-np.abs(g), kind="stable")[:k]
        gs = np.zeros_like(g)
        gs[supp] = g[supp]
        den = float(np.sum((A @ gs) ** 2))
        mu = t * float(gs @ gs) / den if den > 0 else t
        cur = set(supp.tolist())
        for _ in range(60):
            new = hard_threshold(s + mu * g, k)
            nz = np.flatnonzero(new)
            if set(nz.tolist()) == cur:
                break
            d = new - s
            bound = (1 - BACKTRACK_C) * float(d @ d) / max(float(np.sum((A @ d) ** 2)), 1e-300)
            if mu <= bound:
                break
            mu /= BACKTRACK_KAPPA * (1 - BACKTRACK_C)
        supp = np.argsort(-np.abs(new), kind="stable")[:k]
        return new

    return update


def iht_reconstruct(setup: MeasurementSetup, y, cfg: IhtConfig) -> SolveResult:
    """Iterative hard thresholding ``s <- H_K(s + mu A^T (y - A s))`` from ``s = 0``.

    ``cfg.step="fixed"`` uses ``mu = t / ||A||_2^2``; ``"adaptive"`` chooses
    ``mu`` per iteration as ``||g_S||^2 / ||A g_S||^2`` on the current
    support ``S`` and halves it (roughly) until the objective is safe to
    decrease whenever the support would change.
    """
    A = setup.A
    cfg.validate(setup.n)
    mu = cfg.t / spectral_norm_sq(A) if cfg.step == "fixed" else None

    def solve_one(yc):
        if mu is None:
            update = _adaptive_iht_update(A, cfg.k, cfg.t)
        else:
            def update(s, r):
                return hard_threshold(s + mu * (A.T @ r), cfg.k)
        return _iterate(A, yc, update, cfg.max_iter, cfg.eps, "IHT")

    return _run_columns(setup, y, solve_one, "iht")


def ista_reconstruct(setup: MeasurementSetup, y, cfg: IstaConfig | None = None) -> SolveResult:
    """Iterative soft thresholding for ``0.5 ||A s - y||^2 + lam ||s||_1``.

    Update ``s <- soft(s - mu A^T (A s - y), mu * lam)`` with
    ``mu = t / ||A||_2^2``.
    """
    cfg = cfg or IstaConfig()
    cfg.validate()
    A = setup.A
    mu = cfg.t / spectral_norm_sq(A)

    def solve_one(yc):
        lam = cfg.lam if cfg.lam is not None else 1e-3 * float(np.max(np.abs(A.T @ yc), initial=0.0))
        # r passed in is y - A s, so the descent direction is +A^T r
        return _iterate(A, yc, lambda s, r: soft_threshold(s + mu * (A.T @ r), mu * lam),
                        cfg.max_iter, cfg.eps, "ISTA")

    return _run_columns(setup, y, solve_one, "ista")
