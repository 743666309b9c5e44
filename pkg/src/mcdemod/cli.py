"""Command line entry point: ``mcdemod {kernel,generate,demod,sweep,check}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
(bad input data, ill-conditioned output, failed sweep cells or checks).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis
from ._version import __version__
from .config import ConfigError, bundled_config_path, parse_config
from .demod import new_demodulator
from .fileio import (
    FormatError,
    base_metadata,
    read_signal_csv,
    write_estimates_csv,
    write_signal_csv,
    write_sweep_csv,
    write_sweep_json,
    write_truth_json,
)
from .kernels import compensated_kernel, discretize, kernel_to_dict
from .siggen import synthesize

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("orders must be positive integers")
    return vals


def _eps_grid(text: str):
    if text == "auto":
        return "auto"
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or comma-separated numbers, got {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("epsilons must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcdemod", description="Multicarrier demodulation with compensated moving-average kernels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("kernel", help="write the compensated kernel and its FIR taps as JSON")
    k.add_argument("--k", type=int, required=True, help="kernel order")
    k.add_argument("--epsilon", type=float, required=True, help="carrier period")
    k.add_argument("--delta", type=float, help="sample period; adds FIR taps to the output")
    k.add_argument("--plain-area", action="store_true", help="area-sampled taps without discrete moment matching")
    k.add_argument("--out", required=True, help="output JSON path")

    default_cfg = str(bundled_config_path())
    g = sub.add_parser("generate", help="synthesize a sampled composite signal")
    g.add_argument("--config", default=default_cfg, help="run configuration (default: bundled benchmark)")
    g.add_argument("--epsilon", type=float, help="override the carrier period")
    g.add_argument("--delta-div", type=int, help="override samples per period N")
    g.add_argument("--span", type=float, nargs=2, metavar=("A", "B"), help="override the time span")
    g.add_argument("--out", required=True, help="output signal CSV")
    g.add_argument("--truth", help="ground-truth sidecar JSON (default: <out>.truth.json)")

    d = sub.add_parser("demod", help="demodulate a signal CSV")
    d.add_argument("--config", default=default_cfg, help="run configuration (default: bundled benchmark)")
    d.add_argument("--input", required=True, help="signal CSV with columns t,y")
    d.add_argument("--k", type=int, help="kernel order (default: from config)")
    d.add_argument("--epsilon", type=float, help="carrier period (default: signal metadata, then config)")
    d.add_argument("--out", required=True, help="estimates CSV")
    d.add_argument("--allow-invalid", action="store_true",
                   help="exit 0 even if post-warm-up samples are flagged ill-conditioned")

    s = sub.add_parser("sweep", help="epsilon sweep with convergence-slope fits")
    s.add_argument("--config", default=default_cfg, help="run configuration (default: bundled benchmark)")
    s.add_argument("--k", type=_int_list, help="orders, e.g. 1,2,3 (default: from config)")
    s.add_argument("--eps-grid", type=_eps_grid, default="auto", help="'auto' or comma-separated epsilons")
    s.add_argument("--delta-div", type=int, help="override samples per period N")
    s.add_argument("--workers", type=int, help=f"parallel cells (default: ${analysis.WORKERS_ENV} or CPU count)")
    s.add_argument("--out", required=True, help="sweep result JSON")
    s.add_argument("--csv", nargs="?", const=True, default=None, metavar="PATH",
                   help="also write a plot-ready CSV (default path: <out>.csv)")

    c = sub.add_parser("check", help="run the property checks and print measured slopes")
    c.add_argument("--suite", choices=("lemmas", "appendix"), required=True)
    return p


def _cmd_kernel(args) -> int:
    if args.k < 1 or not args.epsilon > 0:
        raise UsageError("--k must be >= 1 and --epsilon positive")
    K = compensated_kernel(args.k, args.epsilon)
    taps = None
    if args.delta is not None:
        if not args.delta > 0:
            raise UsageError("--delta must be positive")
        taps = discretize(K, args.delta, match_moments=not args.plain_area)
    doc = {"metadata": base_metadata(), "kernel": kernel_to_dict(K, taps)}
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"k={args.k} coefficients={[float(c) for c in K.coefficients]}" + (f" taps={len(taps)}" if taps else ""))
    return EXIT_OK


def _cmd_generate(args) -> int:
    base = parse_config(args.config)
    over = {"epsilon": args.epsilon, "delta_divisor": args.delta_div}
    if args.span:
        a, b = args.span
        w = (max(a, base.window[0]), min(b, base.window[1]))
        over.update(span=(a, b), window=w if w[1] > w[0] else (a, b))
    cfg = base.with_overrides(**over)
    sc = cfg.build()
    sig = synthesize(sc.encoded, sc.S, sc.disturbance, cfg.epsilon, cfg.delta, cfg.span,
                     sc.perturbation_k, sc.perturbation_scale)
    meta = {"config_hash": cfg.config_hash, "delta_divisor": cfg.delta_divisor}
    write_signal_csv(args.out, sig, meta)
    truth = args.truth or str(Path(args.out).with_suffix("")) + ".truth.json"
    write_truth_json(truth, sig.times, sc.encoded(sig.times),
                     dict(meta, epsilon=cfg.epsilon, delta=cfg.delta))
    print(f"wrote {len(sig)} samples to {args.out} (truth: {truth})")
    return EXIT_OK


def _cmd_demod(args) -> int:
    cfg = parse_config(args.config)
    sc = cfg.build()
    sig = read_signal_csv(args.input)
    eps = args.epsilon or sig.metadata.get("epsilon") or cfg.epsilon
    k = args.k if args.k is not None else cfg.order_k
    if k < 1:
        raise UsageError("--k must be >= 1")
    state = new_demodulator(sc.S, sc.R, k, float(eps), sig.delta, kappa_threshold=cfg.kappa_threshold)
    out = state.process(sig.times, sig.values)
    L = state.tap_count
    write_estimates_csv(args.out, out, {"config_hash": cfg.config_hash, "k": k, "epsilon": float(eps),
                                        "delta": sig.delta, "warmup_samples": L})
    bad = int(np.count_nonzero(~out.valid[L:]))
    finite = out.kappa[L:][np.isfinite(out.kappa[L:])]
    kmax = float(finite.max()) if len(finite) else float("inf")
    print(f"wrote {len(out)} estimates to {args.out}; max kappa after warm-up {kmax:.4g}; "
          f"{bad} flagged samples after warm-up")
    if bad and not args.allow_invalid:
        print(f"error: {bad} post-warm-up samples are ill-conditioned", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if args.delta_div is not None:
        cfg = cfg.with_overrides(delta_divisor=args.delta_div)
    sc = cfg.build()
    k_list = args.k or list(sc.k_list)
    grid = sc.epsilon_grid if args.eps_grid == "auto" else args.eps_grid
    t0 = time.perf_counter()
    results = analysis.run_sweep(sc, k_list, grid, workers=args.workers)
    elapsed = time.perf_counter() - t0
    meta = {
        "config_hash": cfg.config_hash,
        "delta_divisor": cfg.delta_divisor,
        "epsilon_grid": sorted(grid, reverse=True),
        "epsilon_grid_source": "auto (log-spaced, from config sweep block)" if args.eps_grid == "auto" else "command line",
        "score_channel": cfg.score_channel,
        "window": list(cfg.window),
        "elapsed_s": round(elapsed, 3),
    }
    write_sweep_json(args.out, results, meta)
    if args.csv:
        path = args.csv if isinstance(args.csv, str) else str(Path(args.out).with_suffix(".csv"))
        write_sweep_csv(path, results, {"config_hash": cfg.config_hash})
    failed = 0
    for r in results:
        print(f"k={r.k}: slope {r.fitted_slope:.3f} (max log residual {r.fit_residual:.3g}) over {len(r.epsilons)} points")
        for e, msg in r.cell_errors.items():
            print(f"  cell eps={e:.4g} failed: {msg}", file=sys.stderr)
            failed += 1
    return EXIT_RUNTIME if failed else EXIT_OK


def _cmd_check(args) -> int:
    results = analysis.run_check_suite(args.suite)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


_COMMANDS = {"kernel": _cmd_kernel, "generate": _cmd_generate, "demod": _cmd_demod,
             "sweep": _cmd_sweep, "check": _cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
