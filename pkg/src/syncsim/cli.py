"""Command-line entry point ``sync-sim``.

Examples::

    sync-sim run config.json
    sync-sim sweep-connectivity config.json --c 15,13,11,9,7,5,3,1
    sync-sim sweep-snr config.json --db 15:35:2 --jitter 5
    sync-sim plot out/convergence.csv out/snr.csv -o out/plots
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, InputError, SyncSimError
from .experiments import ExperimentConfig, emit_plots, run_connectivity_sweep, run_convergence, run_snr_sweep

log = logging.getLogger("syncsim")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def parse_db_range(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return [start + i * step for i in range(count)]
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}; use start:stop:step or a,b,c")


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    return cfg.with_overrides(master_seed=args.seed, mode=args.mode, iterations=args.iterations)


def _out(args, cfg: ExperimentConfig, name: str) -> Path:
    return Path(args.output) if args.output else Path(cfg.output_dir) / name


def cmd_run(args) -> int:
    cfg = _load(args)
    path = _out(args, cfg, "convergence.csv")
    res = run_convergence(cfg, path)
    for r, s in zip(res.runs, res.steady):
        if s is not None:
            log.info(
                "seed %d: measured std %.3f ps, ground-truth pair std %.3f ps, mean bias %.3g ps",
                r.seed, s.measured_std * 1e12, s.truth_std * 1e12, s.mean_bias * 1e12,
            )
    print(path)
    return EXIT_OK


def cmd_sweep_connectivity(args) -> int:
    cfg = _load(args)
    path = _out(args, cfg, "connectivity.csv")
    res = run_connectivity_sweep(cfg, args.c, path)
    for p in res.points:
        log.info("C=%d: mean iterations %.2f (%d censored, threshold %.3g s)", p.C, p.mean_iterations, p.censored, p.threshold)
    print(path)
    return EXIT_OK


def cmd_sweep_snr(args) -> int:
    cfg = _load(args)
    path = _out(args, cfg, "snr.csv")
    res = run_snr_sweep(cfg, args.db, args.jitter, path)
    for p in res.points:
        log.info("SNR %.1f dB: measured %.3f ps, CRLB %.3f ps", p.snr_db, p.measured_std * 1e12, p.crlb_std * 1e12)
    print(path)
    return EXIT_OK


def cmd_plot(args) -> int:
    for p in emit_plots(args.csv, args.output):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sync-sim", description="Decentralized time synchronization simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log per-run summaries")
    sub = parser.add_subparsers(dest="command", required=True)

    def study(name, func, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--mode", choices=["signal", "timestamp"])
        p.add_argument("--iterations", type=int)
        p.add_argument("-o", "--output", help="CSV path (default: <output_dir>/<study>.csv)")
        p.set_defaults(func=func)
        return p

    study("run", cmd_run, "fully connected convergence study")
    p = study("sweep-connectivity", cmd_sweep_connectivity, "iterations-to-converge vs active link count")
    p.add_argument("--c", type=parse_int_list, required=True, help="comma-separated link counts")
    p = study("sweep-snr", cmd_sweep_snr, "steady-state precision vs SNR")
    p.add_argument("--db", type=parse_db_range, required=True, help="per-sample SNRs, start:stop:step")
    p.add_argument("--jitter", type=float, default=None, help="per-link uniform SNR spread (+/- dB)")

    p = sub.add_parser("plot", help="render SVG charts from study CSVs", parents=[common])
    p.add_argument("csv", nargs="+")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SyncSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
