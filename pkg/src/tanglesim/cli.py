"""Command-line harness: load a scenario, run its Monte Carlo batch, write
CSV outputs and print one summary line per run.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import (PRESET_NAMES, ConfigError, ScenarioConfig, apply_overrides,
                     load_config, preset)
from .engine import EngineError, run_monte_carlo

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tanglesim",
        description="Discrete-event simulator of a DAG ledger with a "
                    "past-cone confirmation-time tip filter.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES,
                     help="shipped scenario preset")
    src.add_argument("--config", metavar="PATH",
                     help="scenario file (JSON or TOML; run_meta.json accepted)")
    run.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                     dest="overrides", help="override a config key (repeatable)")
    run.add_argument("--seed", type=int, help="root seed override")
    run.add_argument("--runs", type=int, help="Monte Carlo replication count override")
    run.add_argument("--duration", type=float, help="simulated seconds override")
    run.add_argument("--out", default=os.environ.get("TANGLESIM_OUT"),
                     help="output directory (default: $TANGLESIM_OUT)")
    run.add_argument("--jobs", type=int, default=1,
                     help="parallel isolated Monte Carlo workers")
    verbosity = run.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true")
    verbosity.add_argument("--verbose", action="store_true")
    return parser


def _resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    cfg = preset(args.preset) if args.preset else load_config(args.config)
    apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.runs is not None:
        cfg.runs = args.runs
    if args.duration is not None:
        cfg.duration_s = args.duration
    cfg.validate()
    return cfg


def _summary_line(index: int, seed: int, summary: dict) -> str:
    def show(value, spec="{:.2f}"):
        return spec.format(value) if value is not None else "n/a"

    return (f"run {index:03d} seed={seed}: "
            f"tips(last quartile)={show(summary['mean_tips_last_quartile'], '{:.1f}')} "
            f"latency mean={show(summary['latency_mean'])}s "
            f"max={show(summary['latency_max'])}s "
            f"honest scaled-CR CV={show(summary['honest_scaled_cr_cv'], '{:.3f}')}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose:
        level = logging.INFO
    elif args.quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.out is None:
        print("error: no output directory (--out or $TANGLESIM_OUT)", file=sys.stderr)
        return 2
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {outdir}: {exc}", file=sys.stderr)
        return 2

    log.info("scenario %s: %d run(s) of %.0f s, seed %d",
             cfg.name, cfg.runs, cfg.duration_s, cfg.seed)
    try:
        summaries = run_monte_carlo(cfg, outdir, version(), jobs=args.jobs)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        for i, summary in enumerate(summaries):
            print(_summary_line(i, cfg.seed + i, summary))
        print(f"wrote {cfg.runs} run(s) to {outdir}")
    return 0


def version() -> str:
    return f"tanglesim-{__version__}"


if __name__ == "__main__":
    sys.exit(main())
