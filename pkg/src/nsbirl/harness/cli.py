"""Command line entry point.

Exit codes: 0 success, 1 invalid configuration, 2 failure while running.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..environments import TWO_STATE_GAMMA
from .config import ConfigError, ExperimentConfig, GridConfig, load_config
from .plotting import render_series_plot
from .runner import (
    RunFailure,
    exact_two_state_figure,
    load_series,
    run_experiment,
    run_misspecification_grid,
    write_grid,
    write_results,
)

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


def _cmd_run(args) -> int:
    config = load_config(args.config, ExperimentConfig)
    out = write_results(run_experiment(config, args.workers), args.out or config.output_dir)
    print(out)
    return EXIT_OK


def _cmd_grid(args) -> int:
    config = load_config(args.config, GridConfig)
    grid = run_misspecification_grid(config, args.workers)
    out = write_grid(grid, args.out or config.output_dir)
    print(grid.to_csv(), end="")
    print(out)
    return EXIT_OK


def _cmd_exact(args) -> int:
    if not args.eps:
        raise ConfigError("--eps needs at least one value")
    if args.beta_max <= 0 or args.beta_step <= 0:
        raise ConfigError("--beta-max and --beta-step must be positive")
    betas = np.round(np.arange(0.0, args.beta_max + args.beta_step / 2, args.beta_step), 10)
    csv_path, svg_path = exact_two_state_figure(betas, args.eps, args.gamma, args.out)
    print(csv_path)
    print(svg_path)
    return EXIT_OK


def _cmd_plot(args) -> int:
    collected = {}
    for d in args.results:
        for (inf, eps, name), s in load_series(d).items():
            label = inf if len(args.results) == 1 else f"{Path(d).name}:{inf}"
            collected.setdefault((eps, name), {})[label] = s
    out = Path(args.out or args.results[0])
    out.mkdir(parents=True, exist_ok=True)
    for (eps, name), group in sorted(collected.items()):
        path = out / f"{name}__{eps}.svg"
        path.write_text(render_series_plot(group, title=f"{name} ({eps})"))
        print(path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    print(f"ok: {type(config).__name__}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsbirl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: output_dir from the config)")
    run.add_argument("--workers", type=int, default=None, help="worker processes (default: $NSBIRL_WORKERS or CPU count)")
    run.set_defaults(func=_cmd_run)

    grid = sub.add_parser("grid", help="run a demonstrator x inferrer misspecification grid")
    grid.add_argument("config")
    grid.add_argument("--out")
    grid.add_argument("--workers", type=int, default=None)
    grid.set_defaults(func=_cmd_grid)

    ex = sub.add_parser("exact-two-state", help="exact two-trajectory MI on the apple/banana MDP")
    ex.add_argument("--beta-max", type=float, default=10.0)
    ex.add_argument("--beta-step", type=float, default=0.5)
    ex.add_argument("--eps", type=float, nargs="*", default=[0.0, 0.1, 0.3, 0.45, 0.49, 0.5])
    ex.add_argument("--gamma", type=float, default=TWO_STATE_GAMMA)
    ex.add_argument("--out", default="results/exact_two_state")
    ex.set_defaults(func=_cmd_exact)

    plot = sub.add_parser("plot", help="render SVG figures from one or more result directories")
    plot.add_argument("results", nargs="+")
    plot.add_argument("--out")
    plot.set_defaults(func=_cmd_plot)

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except RunFailure as e:
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_FAILED
    except Exception as e:  # noqa: BLE001
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
