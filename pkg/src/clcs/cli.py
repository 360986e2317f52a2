"""Command-line front end.

Subcommands: generate, measure, reconstruct, evaluate, benchmark, min-sr.
Exit codes: 0 success, 2 usage or configuration error, 3 input error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import (DEFAULT_NOISE, DOMINANT_SHARE, LOW_BAND, PROFILE_CENTER, PROFILE_WIDTH,
                      ImagePrepSpec, generate_batch, prepare_image, synthetic_scene)
from .errors import ConfigError, DimensionError, InputError
from .formats import (dumps_json, fmt, is_image_path, read_json, read_table, to_pixels,
                      write_json, write_pgm, write_signals_csv)
from .harness import (SOLVERS, benchmark_columns, build_config, derive_seed,
                      make_grid, min_sr_search, run_grid, run_solver, score)
from .sensing import build_dct_basis, compute_sparse_rate, make_rng, make_setup

log = logging.getLogger("clcs")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4
NOISE_STREAM = 2

# flag name -> config field
SOLVER_FLAGS = {"th": "th", "max_iter": "max_iter", "eps": "eps", "w_tv": "w_tv",
                "w_lv": "w_lv", "inner_steps": "inner_steps", "lr": "lr",
                "optimizer": "optimizer", "k": "k", "lam": "lam", "t": "t",
                "step": "step", "prior_mode": "prior_mode"}


class UsageError(ConfigError):
    pass


def _add_solver_flags(p, multi=False):
    if multi:
        p.add_argument("--solver", nargs="+", choices=SOLVERS, default=list(SOLVERS),
                       help="solvers to sweep (default: all)")
    else:
        p.add_argument("--solver", choices=SOLVERS, default="omp")
    p.add_argument("--config", help="JSON file with solver parameters; flags take precedence")
    g = p.add_argument_group("solver parameters")
    g.add_argument("--th", type=float, help="support threshold (default 0.7)")
    g.add_argument("--max-iter", type=int, help="maximum outer iterations (default 200)")
    g.add_argument("--eps", type=float, help="residual-norm stopping tolerance (default 1e-6)")
    g.add_argument("--w-tv", type=float, help="CLOMP TV weight (default: scaled to the data)")
    g.add_argument("--w-lv", type=float, help="CLOMP LV weight (default: scaled to the data)")
    g.add_argument("--inner-steps", type=int, help="CLOMP gradient steps per outer iteration")
    g.add_argument("--lr", type=float, help="CLOMP learning rate")
    g.add_argument("--optimizer", choices=("plain", "momentum", "adam"))
    g.add_argument("--prior-mode", choices=("1d", "2d"))
    g.add_argument("--k", type=int, help="IHT sparsity level (default round(Kr n))")
    g.add_argument("--lam", type=float, help="ISTA L1 weight")
    g.add_argument("--t", type=float, help="IHT/ISTA step scale")
    g.add_argument("--step", choices=("adaptive", "fixed"), help="IHT step rule (default adaptive)")


def _add_format(p):
    p.add_argument("--format", choices=("csv", "json"), default="json",
                   help="report format (default json)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clcs", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthetic sparse signals (CSV) or a test image (PGM)")
    p.add_argument("--output", required=True)
    p.add_argument("--truth-output", help="coefficient sidecar (default <output>.s.csv)")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--kr", type=float, default=0.1)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    p.add_argument("--image", action="store_true", help="write a synthetic grayscale image")
    p.add_argument("--size", type=int, default=64, help="image side length")

    p = sub.add_parser("measure", help="apply a seeded Gaussian sensing matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--sr", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="measurement noise std")

    p = sub.add_parser("reconstruct", help="recover signals from measurements")
    p.add_argument("--input", required=True,
                   help="measurements CSV from 'measure', or signals CSV / PGM image")
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="metrics report path")
    p.add_argument("--truth", help="ground-truth signals for the report")
    p.add_argument("--sr", type=float, help="sampling rate when the input is not measurements")
    p.add_argument("--seed", type=int, default=0, help="matrix seed when measuring the input")
    p.add_argument("--kr", type=float, help="sparse rate (sets the IHT sparsity level)")
    _add_solver_flags(p)
    _add_format(p)

    p = sub.add_parser("evaluate", help="compare reconstructions with a reference")
    p.add_argument("--reference", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--output", help="report path (default stdout)")
    _add_format(p)

    p = sub.add_parser("benchmark", help="sweep a (n, Sr, Kr, solver) grid")
    p.add_argument("--output", required=True, help="long-format CSV, one row per cell")
    p.add_argument("--grid", help="JSON with keys n, sr, kr, solvers, count")
    p.add_argument("--n", type=int, nargs="+", default=[256])
    p.add_argument("--sr", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    p.add_argument("--kr", type=float, nargs="+", default=[0.1])
    p.add_argument("--count", type=int, default=10, help="signals per cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    p.add_argument("--workers", type=int, default=1)
    _add_solver_flags(p, multi=True)

    p = sub.add_parser("min-sr", help="smallest sampling rate reaching an SSIM target")
    p.add_argument("--input", required=True, help="signals CSV or PGM image")
    p.add_argument("--index", type=int, default=0, help="row of a signals CSV")
    p.add_argument("--output", help="report path (default stdout)")
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sr-start", type=float, default=0.01)
    p.add_argument("--sr-stop", type=float, default=1.0)
    p.add_argument("--sr-step", type=float, default=0.01)
    p.add_argument("--kr", type=float, help="sparse rate (sets the IHT sparsity level)")
    _add_solver_flags(p)
    _add_format(p)
    return ap


def solver_params(args) -> dict:
    params = {}
    if getattr(args, "config", None):
        params.update(read_json(args.config))
    for flag, key in SOLVER_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            params[key] = v
    return params


def _emit(text: str, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _table_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (fmt(v) if isinstance(v, float) else ("" if v is None else v))
                    for k, v in r.items()})
    return buf.getvalue()


def _per_signal_csv(per_signal) -> str:
    rows = [{"index": i, **r} for i, r in enumerate(per_signal)]
    cols = ["index", "ssim", "psnr", "mse", "pcc", "iterations", "final_residual_norm"]
    return _table_csv(rows, [c for c in cols if any(c in r for r in rows)])


def _sidecar(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".s" + p.suffix)


def cmd_generate(args):
    if args.image:
        D = build_dct_basis(args.size)
        prep = prepare_image(ImagePrepSpec(synthetic_scene(max(256, args.size), args.seed),
                                           (args.size, args.size), args.kr), D)
        meta = {"kind": "image", "seed": args.seed, "size": args.size, "target_kr": args.kr,
                "kr": prep.kr, "sigma": prep.sigma, "reached": prep.reached}
        write_pgm(args.output, prep.image, meta)
        return {"image": args.output, "kr": prep.kr, "reached": prep.reached}
    D = build_dct_basis(args.n)
    X, S = generate_batch(args.n, args.kr, args.count, seed=args.seed,
                          noise_level=args.noise, D=D)
    meta = {"kind": "signals", "n": args.n, "kr": args.kr, "count": args.count,
            "seed": args.seed, "noise_level": args.noise,
            "profile": {"center": PROFILE_CENTER, "width": PROFILE_WIDTH,
                        "dominant_share": DOMINANT_SHARE, "low_band": LOW_BAND}}
    write_signals_csv(args.output, X.T, meta)
    truth = args.truth_output or _sidecar(args.output)
    write_signals_csv(truth, S.T, {**meta, "kind": "coefficients"}, prefix="s")
    return {"signals": str(args.output), "coefficients": str(truth)}


def _source_info(data, meta):
    image = meta.get("kind") == "image"
    info = {"kind": "image" if image else "signals", "shape": list(data.shape)}
    for k in ("kr", "seed", "noise_level"):
        if k in meta:
            info[k] = meta[k]
    return info


def _measure_array(X, sr, seed, noise):
    setup = make_setup(X.shape[0], sr, seed)
    Y = setup.M @ X
    if noise > 0:
        Y = Y + noise * make_rng(derive_seed(seed, NOISE_STREAM)).standard_normal(Y.shape)
    return setup, Y


def _setup_meta(setup, seed):
    return {"n": setup.n, "m": setup.m, "sr": setup.sr, "seed": seed,
            "fingerprint": setup.fingerprint()}


def cmd_measure(args):
    X, meta = read_table(args.input)
    if meta.get("kind") == "measurements":
        raise InputError(f"{args.input}: already contains measurements")
    if args.noise < 0:
        raise ConfigError("--noise must be >= 0")
    setup, Y = _measure_array(X, args.sr, args.seed, args.noise)
    out = {"kind": "measurements", **_setup_meta(setup, args.seed), "sr_requested": args.sr,
           "noise_level": args.noise, "source": _source_info(X, meta)}
    write_signals_csv(args.output, Y.T, out, prefix="y")
    return {"measurements": args.output, "m": setup.m, "fingerprint": setup.fingerprint()}


def resolved_config(cfg, res) -> dict:
    """Config as run, with CLOMP's data-dependent defaults filled in."""
    out = asdict(cfg)
    for k in ("lr", "w_tv", "w_lv", "prior_mode"):
        if k in out and res.info.get(k) is not None:
            out[k] = res.info[k]
    return out


def _load_truth(path):
    X, meta = read_table(path)
    return X, meta.get("kind") == "image"


def cmd_reconstruct(args):
    data, meta = read_table(args.input)
    truth = None
    image = False
    if meta.get("kind") == "measurements":
        try:
            n, seed = int(meta["n"]), int(meta["seed"])
            sr = float(meta.get("sr_requested", meta["sr"]))
            src = meta.get("source", {})
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{args.input}: incomplete measurement metadata ({e})") from e
        setup = make_setup(n, sr, seed)
        if setup.fingerprint() != meta.get("fingerprint", setup.fingerprint()):
            raise InputError(f"{args.input}: sensing matrix fingerprint mismatch")
        if data.shape[0] != setup.m:
            raise InputError(f"{args.input}: rows have {data.shape[0]} values, expected m={setup.m}")
        Y = data
        image = src.get("kind") == "image"
        kr = args.kr if args.kr is not None else src.get("kr")
    else:
        if args.sr is None:
            raise UsageError("--sr is required when the input is not a measurements file")
        image = meta.get("kind") == "image"
        setup, Y = _measure_array(data, args.sr, args.seed, 0.0)
        seed = args.seed
        truth = data
        kr = args.kr if args.kr is not None else meta.get("kr")
        if kr is None and not image:
            kr = float(np.mean([compute_sparse_rate(c, setup.basis) for c in data.T]))
    if args.truth:
        truth, timage = _load_truth(args.truth)
        image = image or timage
        if truth.shape[0] != setup.n or (not image and truth.shape[1] != Y.shape[1]):
            raise DimensionError(f"truth shape {truth.shape} does not match the reconstruction")

    cfg = build_config(args.solver, solver_params(args), setup.n, kr)
    t0 = time.perf_counter()
    res = run_solver(args.solver, setup, Y, cfg, image=image)
    wall = time.perf_counter() - t0

    config = resolved_config(cfg, res)
    out_meta = {"kind": "image" if image else "reconstruction", "solver": args.solver,
                "config": config, **_setup_meta(setup, seed)}
    if image:
        write_pgm(args.output, res.x_hat, out_meta)
        saved = to_pixels(res.x_hat) / 255.0
    else:
        write_signals_csv(args.output, res.x_hat.T, out_meta)
        saved = res.x_hat
    its = np.atleast_1d(res.iterations)
    rn = np.atleast_1d(res.final_residual_norm)
    report = {"command": "reconstruct", "solver": args.solver, "config": config,
              "setup": _setup_meta(setup, seed), "image": image,
              "iterations": its.tolist(), "final_residual_norm": rn.tolist(),
              "timing": {"wall_time": wall}}
    if truth is not None:
        # score what was written, so evaluate on the saved file agrees
        reports, agg = score(truth, saved, image)
        report["metrics"] = agg
        report["per_signal"] = [r.as_dict() for r in reports]
    if args.report:
        if args.format == "json":
            write_json(args.report, report)
        else:
            rows = [dict(r) for r in report.get("per_signal", [{}] * its.size)]
            for i, r in enumerate(rows):
                if not image:
                    r["iterations"] = int(its[i])
                    r["final_residual_norm"] = float(rn[i])
            Path(args.report).write_text(_per_signal_csv(rows), encoding="utf-8")
    return {"output": args.output, "fingerprint": setup.fingerprint(),
            "metrics": report.get("metrics")}


def cmd_evaluate(args):
    ref, rmeta = read_table(args.reference)
    est, _ = read_table(args.estimate)
    if ref.shape != est.shape:
        raise DimensionError(f"reference {ref.shape} and estimate {est.shape} differ in shape")
    image = rmeta.get("kind") == "image" or is_image_path(args.reference)
    reports, agg = score(ref, est, image)
    per = [r.as_dict() for r in reports]
    if args.format == "json":
        _emit(dumps_json({"command": "evaluate", "image": image, "metrics": agg,
                          "per_signal": per}), args.output)
    else:
        _emit(_per_signal_csv(per), args.output)
    return None


def cmd_benchmark(args):
    ns, srs, krs, solvers, count = args.n, args.sr, args.kr, args.solver, args.count
    if args.grid:
        g = read_json(args.grid)
        try:
            ns = [int(v) for v in g.get("n", ns)]
            srs = [float(v) for v in g.get("sr", srs)]
            krs = [float(v) for v in g.get("kr", krs)]
            solvers = list(g.get("solvers", solvers))
            count = int(g.get("count", count))
        except (TypeError, ValueError) as e:
            raise InputError(f"{args.grid}: bad grid value ({e})") from e
    bad = [s for s in solvers if s not in SOLVERS]
    if bad:
        raise UsageError(f"unknown solver(s) {bad}")
    if count < 1 or args.workers < 1:
        raise UsageError("--count and --workers must be >= 1")
    cells = make_grid(ns, srs, krs, solvers, count, args.seed, args.noise, solver_params(args))
    rows = run_grid(cells, args.workers)
    Path(args.output).write_text(_table_csv(rows, benchmark_columns()), encoding="utf-8")
    failed = sum(r["status"] != "ok" for r in rows)
    return {"output": args.output, "cells": len(rows), "failed": failed}


def cmd_min_sr(args):
    data, meta = read_table(args.input)
    if meta.get("kind") == "measurements":
        raise InputError(f"{args.input}: min-sr needs ground-truth signals, not measurements")
    image = meta.get("kind") == "image"
    if image:
        x = data
    else:
        if not 0 <= args.index < data.shape[1]:
            raise UsageError(f"--index {args.index} out of range (file has {data.shape[1]} rows)")
        x = data[:, args.index]
    if not 0 < args.sr_step <= 1 or not 0 < args.sr_start <= args.sr_stop <= 1:
        raise UsageError("Sr grid must satisfy 0 < start <= stop <= 1 and 0 < step <= 1")
    kr = args.kr if args.kr is not None else meta.get("kr")
    if kr is None and not image:
        kr = compute_sparse_rate(x, build_dct_basis(x.shape[0]))
    params = solver_params(args)
    res = min_sr_search(x, args.solver, params, args.target, args.seed,
                        args.sr_start, args.sr_stop, args.sr_step, kr)
    report = {"command": "min-sr", "solver": args.solver, "target": args.target,
              "seed": args.seed, "sr_min": res.sr_min, "reachable": res.reachable,
              "config": asdict(build_config(args.solver, params, x.shape[0], kr)),
              "trials": res.trials, "timing": {"wall_time": res.wall_time}}
    if args.format == "json":
        _emit(dumps_json(report), args.output)
    else:
        cols = ["sr", "m", "status", "ssim", "mse", "fingerprint"]
        _emit(_table_csv(res.trials, cols), args.output)
    if not res.reachable:
        log.warning("SSIM target %.3f not reached up to Sr=%.2f", args.target, args.sr_stop)
    return None


COMMANDS = {"generate": cmd_generate, "measure": cmd_measure, "reconstruct": cmd_reconstruct,
            "evaluate": cmd_evaluate, "benchmark": cmd_benchmark, "min-sr": cmd_min_sr}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = COMMANDS[args.command](args)
    except (InputError, DimensionError, OSError) as e:
        print(f"clcs {args.command}: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as e:
        print(f"clcs {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"clcs {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    if summary is not None and args.verbose:
        print(json.dumps(summary, default=str), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
