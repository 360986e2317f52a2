"""Coefficients learning on OMP (CLOMP).

OMP's support growth is kept (correlate the residual with the columns of
``A``, threshold the normalised magnitudes, OR the hits into the mask) but
the pseudo-inverse refit is replaced by gradient descent on the masked
coefficients, under

    L(s) = ||A (mask * s) - y||^2 + w_tv * TV(x_hat) + w_lv * LV(x_hat),
    x_hat = D (mask * s).

For a column batch the residual term is summed over columns and the priors
are evaluated either per column (independent 1D signals) or on the
assembled ``n x a`` image.

OMP only grows its support after solving the least-squares subproblem. The
gradient analogue used here holds back new atoms until a block of
``inner_steps`` updates stops making real progress (``settle_tol``);
without that gate, atoms chosen against a half-fitted residual pile up.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.fft

from . import priors
from .errors import ConfigError, DimensionError, NumericalFailure
from .sensing import MeasurementSetup, SparseCoefficients
from .solvers import SolveResult, _threshold_correlations

OPTIMIZERS = ("plain", "momentum", "adam")
PRIOR_MODES = ("1d", "2d")
# image mode needs larger steps for the priors to propagate across columns
DEFAULT_LR = {"1d": 0.01, "2d": 0.1}


@dataclass
class ClompConfig:
    th: float = 0.7
    max_iter: int = 200
    eps: float = 1e-6
    inner_steps: int = 10
    lr: float | None = None  # None -> DEFAULT_LR[prior_mode]
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    w_tv: float | None = None  # None -> scale-relative default, see default_weights
    w_lv: float | None = None
    lv_window: int = 3
    lv_stride: int = 2
    prior_mode: str | None = None  # None -> "1d" for vectors, "2d" for batches
    # inject new atoms only once the previous block of gradient steps cut
    # the loss by at most this fraction (None: inject every iteration)
    settle_tol: float | None = 0.05

    def validate(self):
        if not 0 < self.th <= 1:
            raise ConfigError("th must lie in (0, 1]")
        if self.max_iter < 1 or self.inner_steps < 1:
            raise ConfigError("max_iter and inner_steps must be >= 1")
        if self.eps <= 0 or (self.lr is not None and self.lr <= 0):
            raise ConfigError("eps and lr must be > 0")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if self.prior_mode is not None and self.prior_mode not in PRIOR_MODES:
            raise ConfigError(f"prior_mode must be one of {PRIOR_MODES}")
        if self.settle_tol is not None and self.settle_tol < 0:
            raise ConfigError("settle_tol must be >= 0")
        for w in (self.w_tv, self.w_lv):
            if w is not None and w < 0:
                raise ConfigError("prior weights must be >= 0")
        if self.lv_stride >= self.lv_window or self.lv_stride < 1:
            raise ConfigError("lv_stride must be positive and smaller than lv_window")


@dataclass
class ClompState:
    s: np.ndarray
    mask: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    step: int = 0
    outer_iteration: int = 0
    residual_norm: float = math.inf


class LossBreakdown(NamedTuple):
    residual_loss: float
    tv_loss: float
    lv_loss: float
    total: float


def init_state(shape) -> ClompState:
    return ClompState(np.zeros(shape), np.zeros(shape, dtype=bool),
                      np.zeros(shape), np.zeros(shape))


def synthesize(setup: MeasurementSetup, coeffs) -> np.ndarray:
    """``D @ coeffs``; uses the fast inverse DCT when the basis is DCT-II."""
    if setup.basis.kind == "dct2":
        return scipy.fft.idct(coeffs, type=2, norm="ortho", axis=0)
    return setup.D @ coeffs


def analyze(setup: MeasurementSetup, signal) -> np.ndarray:
    """``D.T @ signal``."""
    if setup.basis.kind == "dct2":
        return scipy.fft.dct(signal, type=2, norm="ortho", axis=0)
    return setup.D.T @ signal


def residual_injection_step(A, r, th: float, mask) -> np.ndarray:
    """``mask OR select_support(A, r, th)``, column-wise for batches.

    Columns with a zero residual keep their mask unchanged.
    """
    r = np.asarray(r, dtype=float)
    return np.asarray(mask, dtype=bool) | _threshold_correlations(np.abs(A.T @ r), th)


def _resolve_mode(cfg, y):
    if cfg.prior_mode is not None:
        return cfg.prior_mode
    return "1d" if y.ndim == 1 or y.shape[1] == 1 else "2d"


def _prior_parts(x_hat, cfg: ClompConfig, mode: str, need_lv: bool):
    """Per-column (1d mode) or whole-image (2d mode) prior values and gradients."""
    if mode == "2d":
        tv = priors.tv_2d(x_hat)
        lv = priors.lv(x_hat, cfg.lv_window, cfg.lv_stride) if need_lv else None
        tv_val, lv_val = tv.value, (lv.value if lv else 0.0)
        return tv_val, lv_val, tv.grad, (lv.grad if lv else 0.0)
    tv_val, tv_grad = priors.tv_1d_columns(x_hat)
    if not need_lv:
        return tv_val, 0.0, tv_grad, 0.0
    parts = [priors.lv(x_hat[:, j], cfg.lv_window, cfg.lv_stride) for j in range(x_hat.shape[1])]
    return (tv_val, np.array([p.value for p in parts]), tv_grad,
            np.stack([p.grad for p in parts], axis=1))


def _objective(setup: MeasurementSetup, y, eff, cfg: ClompConfig, mode: str):
    """Loss terms for ``(m, a)`` measurements and ``(n, a)`` effective coefficients.

    Returns ``(residual, tv, lv, totals, grad)``. In 1d mode the loss terms
    are per-column arrays; in 2d mode the prior terms are scalars over the
    assembled image and ``totals`` has a single entry.
    """
    w_tv = np.asarray(0.0 if cfg.w_tv is None else cfg.w_tv, dtype=float)
    w_lv = np.asarray(0.0 if cfg.w_lv is None else cfg.w_lv, dtype=float)
    r = setup.A @ eff - y
    res = np.sum(r * r, axis=0)
    grad = 2.0 * (setup.A.T @ r)
    tv = lv = 0.0
    if np.any(w_tv > 0) or np.any(w_lv > 0):
        x_hat = synthesize(setup, eff)
        tv, lv, gtv, glv = _prior_parts(x_hat, cfg, mode, bool(np.any(w_lv > 0)))
        grad += analyze(setup, w_tv * gtv + w_lv * glv)
    if mode == "2d":
        totals = np.atleast_1d(res.sum() + w_tv * tv + w_lv * lv)
    else:
        totals = res + w_tv * tv + w_lv * lv
    return res, tv, lv, totals, grad


def loss_and_gradient(setup: MeasurementSetup, y, state: ClompState, cfg: ClompConfig,
                      mode: str | None = None):
    """Loss breakdown and gradient with respect to ``state.s``.

    The gradient is zero at masked-out coordinates. For batches the
    breakdown sums over columns; with scalar weights
    ``total = residual_loss + w_tv * tv_loss + w_lv * lv_loss``.
    """
    y = np.asarray(getattr(y, "y", y), dtype=float)
    mode = mode or _resolve_mode(cfg, y)
    single = y.ndim == 1
    Y = y[:, None] if single else y
    eff = np.where(state.mask, state.s, 0.0)
    res, tv, lv, totals, grad = _objective(setup, Y, eff[:, None] if single else eff, cfg, mode)
    breakdown = LossBreakdown(float(np.sum(res)), float(np.sum(tv)), float(np.sum(lv)),
                              float(np.sum(totals)))
    if not math.isfinite(breakdown.total):
        raise NumericalFailure("non-finite CLOMP loss", state=state)
    grad = grad[:, 0] if single else grad
    return breakdown, np.where(state.mask, grad, 0.0)


def gradient_step(state: ClompState, grad, cfg: ClompConfig, frozen=None) -> ClompState:
    """One optimiser update in place.

    Only coordinates inside the mask (and outside ``frozen``) move; the
    update rule is plain ``s - lr g``, heavy-ball momentum, or Adam.
    """
    movable = state.mask if frozen is None else state.mask & ~frozen
    grad = np.where(movable, grad, 0.0)
    state.step += 1
    if cfg.optimizer == "plain":
        upd = cfg.lr * grad
    elif cfg.optimizer == "momentum":
        state.m1 = cfg.beta1 * state.m1 + grad
        upd = cfg.lr * state.m1
    else:
        state.m1 = cfg.beta1 * state.m1 + (1 - cfg.beta1) * grad
        state.m2 = cfg.beta2 * state.m2 + (1 - cfg.beta2) * grad * grad
        mhat = state.m1 / (1 - cfg.beta1 ** state.step)
        vhat = state.m2 / (1 - cfg.beta2 ** state.step)
        upd = cfg.lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)
    state.s = state.s - np.where(movable, upd, 0.0)
    return state


def default_weights(Y, m: int, cfg: ClompConfig, mode: str):
    """Prior weights, relative to the measurement energy ``||y||^2 / m``.

    1d mode weighs every column by its own energy, so a signal is treated
    the same whatever batch it travels in. 2d mode uses the energy of the
    whole image. LV is off by default for 1D signals.
    """
    Y = np.asarray(Y, dtype=float)
    if mode == "2d":
        scale = float(np.sum(Y * Y)) / m
    else:
        scale = np.sum(Y * Y, axis=0) / m
    w_tv = cfg.w_tv if cfg.w_tv is not None else 0.01 * scale
    if cfg.w_lv is not None:
        w_lv = cfg.w_lv
    else:
        w_lv = 0.01 * scale if mode == "2d" else 0.0
    return w_tv, w_lv


def resolve_config(cfg: ClompConfig, Y, m: int, mode: str) -> ClompConfig:
    """Copy of ``cfg`` with data-dependent defaults filled in."""
    w_tv, w_lv = default_weights(Y, m, cfg, mode)
    lr = cfg.lr if cfg.lr is not None else DEFAULT_LR[mode]
    return replace(cfg, w_tv=w_tv, w_lv=w_lv, lr=lr, prior_mode=mode)


def _clomp(setup: MeasurementSetup, Y, cfg: ClompConfig, mode: str, single: bool) -> SolveResult:
    cfg.validate()
    if Y.shape[0] != setup.m:
        raise DimensionError(f"measurement length {Y.shape[0]} != m={setup.m}")
    run = resolve_config(cfg, Y, setup.m, mode)
    A = setup.A
    a = Y.shape[1]

    t0 = time.perf_counter()
    state = init_state((setup.n, a))
    # 1d columns are independent problems: each converges, freezes and keeps
    # its own best iterate; 2d mode treats the image as one problem
    n_groups = a if mode == "1d" else 1
    best = np.full(n_groups, math.inf)
    best_s = state.s.copy()
    best_mask = state.mask.copy()
    active = np.ones(a, dtype=bool)
    iterations = np.zeros(a, dtype=int)
    history = []
    support_sizes = []
    prev = np.full(n_groups, math.inf)
    settled = np.ones(n_groups, dtype=bool)
    while state.outer_iteration < cfg.max_iter:
        r = A @ np.where(state.mask, state.s, 0.0) - Y
        norms = np.linalg.norm(r, axis=0)
        if mode == "1d":
            active &= norms >= cfg.eps
        elif norms.max() < cfg.eps:
            active[:] = False
        if not active.any():
            break
        state.residual_norm = float(np.linalg.norm(r))
        hits = _threshold_correlations(np.abs(A.T @ r), cfg.th)
        new = hits & active & ~state.mask
        if cfg.settle_tol is not None:
            gate = settled if mode == "1d" else np.repeat(settled, a)
            new &= gate
        state.mask |= new
        frozen = np.broadcast_to(~active, state.mask.shape)
        for _ in range(cfg.inner_steps):
            *_, grad = _objective(setup, Y, np.where(state.mask, state.s, 0.0), run, mode)
            gradient_step(state, grad, run, frozen=frozen)
        *_, totals, _ = _objective(setup, Y, np.where(state.mask, state.s, 0.0), run, mode)
        if not np.all(np.isfinite(totals)):
            raise NumericalFailure("non-finite CLOMP loss", state=state)
        history.append(float(np.sum(totals)))
        if cfg.settle_tol is not None:
            with np.errstate(invalid="ignore", divide="ignore"):
                drop = (prev - totals) / prev
            settled = ~(drop > cfg.settle_tol)
            prev = totals.copy()
        support_sizes.append(int(state.mask.sum()))
        iterations[active] += 1
        state.outer_iteration += 1
        better = totals <= best
        if mode == "1d":
            better &= active
            best[better] = totals[better]
            best_s[:, better] = state.s[:, better]
            best_mask[:, better] = state.mask[:, better]
        elif better[0]:
            best[0] = totals[0]
            best_s[:] = state.s
            best_mask[:] = state.mask
    # columns that converged before any update keep their (exact) state
    untouched = ~np.isfinite(best) if mode == "1d" else np.zeros(a, dtype=bool)
    if mode == "2d" and not np.isfinite(best[0]):
        untouched[:] = True
    best_s[:, untouched] = state.s[:, untouched]
    best_mask[:, untouched] = state.mask[:, untouched]

    eff = np.where(best_mask, best_s, 0.0)
    x_hat = synthesize(setup, eff)
    rnorm = np.linalg.norm(A @ eff - Y, axis=0)
    wall = time.perf_counter() - t0
    info = {"solver": "clomp", "prior_mode": mode, "lr": run.lr,
            "inner_steps": cfg.inner_steps, "gradient_steps": state.step,
            "w_tv": _plain(run.w_tv, single), "w_lv": _plain(run.w_lv, single),
            "loss_history": history, "support_sizes": support_sizes}
    if single:
        return SolveResult(SparseCoefficients(best_s[:, 0], best_mask[:, 0]), x_hat[:, 0],
                           int(iterations[0]), float(rnorm[0]), wall, info)
    return SolveResult(SparseCoefficients(best_s, best_mask), x_hat, iterations, rnorm, wall, info)


def _plain(w, single):
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return float(w)
    return float(w[0]) if single else w.tolist()


def clomp_reconstruct(setup: MeasurementSetup, y, cfg: ClompConfig | None = None) -> SolveResult:
    """Reconstruct one signal (or, given ``(m, a)`` measurements, a batch)."""
    cfg = cfg or ClompConfig()
    y = np.asarray(getattr(y, "y", y), dtype=float)
    if y.ndim == 1:
        return _clomp(setup, y[:, None], cfg, cfg.prior_mode or "1d", single=True)
    return clomp_reconstruct_batch(setup, y, cfg)


def clomp_reconstruct_batch(setup: MeasurementSetup, Y, cfg: ClompConfig | None = None) -> SolveResult:
    """Jointly reconstruct the columns of ``Y`` sharing one sensing matrix.

    ``prior_mode="2d"`` (the default for more than one column) treats the
    columns as an image; ``"1d"`` treats them as independent signals.
    """
    cfg = cfg or ClompConfig()
    Y = np.asarray(getattr(Y, "y", Y), dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    return _clomp(setup, Y, cfg, _resolve_mode(cfg, Y), single=False)
