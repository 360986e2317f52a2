"""Experiment plumbing shared by the command-line front end.

Seeds for every derived object (sensing matrices per sampling rate,
signal batches per grid cell) come from ``numpy.random.SeedSequence`` so
that cells are independent and reproducible in any execution order.
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .datagen import DEFAULT_NOISE, generate_batch
from .errors import CSError, ConfigError
from .learning import ClompConfig, clomp_reconstruct, clomp_reconstruct_batch
from .metrics import aggregate, batch_reports, quality_report
from .sensing import make_setup
from .solvers import (IhtConfig, IstaConfig, OmpConfig, SolveResult, iht_reconstruct,
                      ista_reconstruct, omp_reconstruct)

log = logging.getLogger(__name__)

SOLVERS = ("omp", "iht", "ista", "clomp")
_CONFIGS = {"omp": OmpConfig, "iht": IhtConfig, "ista": IstaConfig, "clomp": ClompConfig}

# tags keep matrix and signal streams apart
MATRIX_STREAM = 0
SIGNAL_STREAM = 1


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for ``keys`` under ``seed``; stable across runs and platforms."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rate_key(v: float) -> int:
    # rates as integers in millionths, usable as seed keys
    return int(round(v * 1_000_000))


def build_config(solver: str, params: dict | None = None, n: int | None = None,
                 kr: float | None = None):
    """Solver config from a flat parameter dict; unknown or ``None`` keys are ignored.

    IHT needs a sparsity level: ``k`` directly, or ``kr`` with ``n``.
    """
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    cls = _CONFIGS[solver]
    names = {f.name for f in fields(cls)}
    kw = {k: v for k, v in (params or {}).items() if k in names and v is not None}
    if solver == "iht" and "k" not in kw:
        if kr is None or n is None:
            raise ConfigError("iht needs a sparsity level (--kr or k in the config)")
        kw["k"] = max(1, int(round(kr * n)))
    cfg = cls(**kw)
    if solver == "iht":
        cfg.validate(n)
    else:
        cfg.validate()
    return cfg


def run_solver(solver: str, setup, Y, cfg, image: bool = False) -> SolveResult:
    """Dispatch to a solver. ``image`` switches CLOMP to whole-image priors."""
    if solver == "omp":
        return omp_reconstruct(setup, Y, cfg)
    if solver == "iht":
        return iht_reconstruct(setup, Y, cfg)
    if solver == "ista":
        return ista_reconstruct(setup, Y, cfg)
    if cfg.prior_mode is None:
        cfg = replace(cfg, prior_mode="2d" if image else "1d")
    if np.ndim(Y) == 1:
        return clomp_reconstruct(setup, Y, cfg)
    return clomp_reconstruct_batch(setup, Y, cfg)


def score(X, X_hat, image: bool):
    """Per-signal reports (one for an image) and their aggregate."""
    reports = [quality_report(X, X_hat)] if image else batch_reports(X, X_hat)
    return reports, aggregate(reports)


@dataclass
class Cell:
    n: int
    sr: float
    kr: float
    solver: str
    count: int
    seed: int
    noise_level: float = DEFAULT_NOISE
    params: dict = field(default_factory=dict)


METRIC_KEYS = ("ssim", "psnr", "mse", "pcc")
STAT_KEYS = ("mean", "min", "max", "p10", "p50", "p90")
TIMING_COLUMNS = ("wall_time", "wall_time_per_signal")


def benchmark_columns():
    cols = ["n", "sr", "kr", "solver", "count", "m", "matrix_seed", "signal_seed", "status",
            "error", "iterations_mean", "iterations_max"]
    cols += [f"{k}_{s}" for k in METRIC_KEYS for s in STAT_KEYS]
    cols += ["fingerprint", "config"]
    cols += list(TIMING_COLUMNS)
    return cols


def run_cell(cell: Cell) -> dict:
    """One grid cell: fresh signals and matrix from derived seeds, solve, score.

    Solver failures become a ``status=failed`` row instead of an exception.
    """
    mseed = derive_seed(cell.seed, MATRIX_STREAM, cell.n, rate_key(cell.sr))
    sseed = derive_seed(cell.seed, SIGNAL_STREAM, cell.n, rate_key(cell.kr))
    row = {"n": cell.n, "sr": cell.sr, "kr": cell.kr, "solver": cell.solver,
           "count": cell.count, "matrix_seed": mseed, "signal_seed": sseed,
           "status": "ok", "error": ""}
    try:
        cfg = build_config(cell.solver, cell.params, cell.n, cell.kr)
        row["config"] = json.dumps(asdict(cfg), sort_keys=True)
        setup = make_setup(cell.n, cell.sr, mseed)
        row["m"] = setup.m
        row["fingerprint"] = setup.fingerprint()
        # per-signal seeds are sseed + j, kept within the int64 range
        X, _ = generate_batch(cell.n, cell.kr, cell.count, seed=sseed % (2 ** 62),
                              noise_level=cell.noise_level, D=setup.basis)
        Y = setup.M @ X
        t0 = time.perf_counter()
        res = run_solver(cell.solver, setup, Y, cfg)
        wall = time.perf_counter() - t0
        _, agg = score(X, res.x_hat, image=False)
        its = np.atleast_1d(res.iterations)
        row["iterations_mean"] = float(its.mean())
        row["iterations_max"] = int(its.max())
        for k in METRIC_KEYS:
            for s in STAT_KEYS:
                row[f"{k}_{s}"] = agg[k][s]
        row["wall_time"] = wall
        row["wall_time_per_signal"] = wall / cell.count
    except (CSError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        log.warning("cell %s failed: %s", cell, e)
        row["status"] = "failed"
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def run_grid(cells, workers: int = 1):
    """Run cells, optionally in a process pool; rows come back in grid order."""
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, cells))


def make_grid(ns, srs, krs, solvers, count, seed, noise_level=DEFAULT_NOISE, params=None):
    return [Cell(n, sr, kr, solver, count, seed, noise_level, dict(params or {}))
            for n in ns for sr in srs for kr in krs for solver in solvers]


@dataclass
class MinSrResult:
    sr_min: float | None
    reachable: bool
    wall_time: float
    trials: list


def sr_grid(start=0.01, stop=1.0, step=0.01):
    k0 = int(round(start / step))
    k1 = int(round(stop / step))
    return [round(k * step, 10) for k in range(k0, k1 + 1)]


def min_sr_search(x, solver: str, params=None, target: float = 0.9, seed: int = 0,
                  start: float = 0.01, stop: float = 1.0, step: float = 0.01,
                  kr: float | None = None) -> MinSrResult:
    """Smallest sampling rate on the grid whose reconstruction SSIM exceeds ``target``.

    Each rate draws a fresh sensing matrix from a seed derived from ``seed``
    and the rate. Rates giving fewer than one measurement are skipped.
    ``wall_time`` accumulates solver time over the rates tried.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    image = x.ndim == 2
    trials = []
    total = 0.0
    for sr in sr_grid(start, stop, step):
        if math.floor(n * sr + 1e-9) < 1:
            trials.append({"sr": sr, "status": "skipped", "reason": "no measurements"})
            continue
        setup = make_setup(n, sr, derive_seed(seed, MATRIX_STREAM, n, rate_key(sr)))
        cfg = build_config(solver, params, n, kr)
        Y = setup.M @ x
        try:
            t0 = time.perf_counter()
            res = run_solver(solver, setup, Y, cfg, image=image)
            total += time.perf_counter() - t0
        except (CSError, ArithmeticError, np.linalg.LinAlgError) as e:
            trials.append({"sr": sr, "m": setup.m, "status": "failed",
                           "error": f"{type(e).__name__}: {e}"})
            continue
        _, agg = score(x, res.x_hat, image=image)
        s = agg["ssim"]["mean"]
        trials.append({"sr": sr, "m": setup.m, "status": "ok", "ssim": s,
                       "mse": agg["mse"]["mean"], "fingerprint": setup.fingerprint()})
        if s is not None and s > target:
            return MinSrResult(sr, True, total, trials)
    return MinSrResult(None, False, total, trials)
