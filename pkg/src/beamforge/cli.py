"""Command line entry point: ``beamforge run | validate | presets``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, load_config, preset_names, preset_path
from .trainer import NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

log = logging.getLogger("beamforge")


def _run_one(config_ref, overrides, out_dir):
    """Run a single config; returns (name, exit code, message). Safe to call in a worker."""
    from .runner import run

    name = str(config_ref)
    try:
        cfg = load_config(config_ref)
        name = cfg.name
        cfg = cfg.with_overrides(out_dir=out_dir, **overrides)
        target_dir = cfg.out_dir or str(Path("runs") / cfg.name)
        result = run(cfg, target_dir)
    except ConfigError as exc:
        return name, EXIT_CONFIG, f"config error: {exc}"
    except NumericalError as exc:
        return name, EXIT_DIVERGED, f"numerical divergence: {exc}"
    except OSError as exc:
        return name, EXIT_IO, f"I/O error: {exc}"
    d = result.diagnostics
    msg = (f"{name}: wrote {target_dir} | RF {list(result.rf_selection.indices)} | "
           f"pattern error {d['pattern_error_hard']:.4g} | min row peak "
           f"{min(d['rf']['min_row_peak'], d['antenna']['min_row_peak']):.4f} | "
           f"{result.duration:.1f}s")
    if result.flagged:
        msg += " | FLAGGED: selectors not converged"
    return name, EXIT_OK, msg


def cmd_run(args) -> int:
    overrides = {"seed": args.seed, "epochs": args.epochs, "power_path": args.power_path}
    configs = args.config
    jobs = []
    for ref in configs:
        out = args.out
        if out is not None and len(configs) > 1:
            out = str(Path(out) / Path(str(ref)).stem)
        jobs.append((ref, overrides, out))

    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_run_one, *zip(*jobs)))
    else:
        outcomes = [_run_one(*job) for job in jobs]

    code = EXIT_OK
    for _, status, msg in outcomes:
        print(msg, file=sys.stdout if status == EXIT_OK else sys.stderr)
        code = max(code, status)
    return code


def cmd_validate(args) -> int:
    code = EXIT_OK
    for ref in args.config:
        try:
            cfg = load_config(ref)
        except ConfigError as exc:
            print(f"{ref}: {exc}", file=sys.stderr)
            code = EXIT_CONFIG
            continue
        print(f"{ref}: ok ({cfg.mode}; N_t={cfg.n_antennas} N_RF={cfg.n_rf} "
              f"M_RF={cfg.m_rf} M_t={cfg.m_t}, {cfg.plan.n_epochs}x{cfg.plan.n_steps} steps)")
    return code


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            cfg = load_config(name)
            print(f"{name:22s} {cfg.mode:14s} N_t={cfg.n_antennas:<4d} N_RF={cfg.n_rf:<4d} "
                  f"M_RF={cfg.m_rf:<4d} M_t={cfg.m_t:<4d} lr={cfg.plan.lr}")
        return EXIT_OK
    if args.name not in preset_names():
        print(f"unknown preset {args.name!r}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(preset_path(args.name).read_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamforge",
                                     description="Learn-to-select hybrid beampattern design.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train a design and write its outputs")
    p_run.add_argument("--config", action="append", required=True,
                       help="config file, result.json, or preset name (repeatable)")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help="output directory (one subdirectory per config when several)")
    p_run.add_argument("--epochs", type=int)
    p_run.add_argument("--power-path", choices=("empirical", "closed-form"))
    p_run.add_argument("--jobs", type=int, default=1, help="run several configs in parallel")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("--config", action="append", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_pre = sub.add_parser("presets", help="list or print the shipped presets")
    p_pre.add_argument("action", choices=("list", "show"))
    p_pre.add_argument("name", nargs="?")
    p_pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets" and args.action == "show" and not args.name:
        print("presets show needs a preset name", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
