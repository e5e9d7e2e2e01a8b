"""Command-line entry point.

    byzsim run <config> [--out DIR]       run the experiment grid
    byzsim validate <config>              parse and check a config, run nothing
    byzsim plot <csv> --attack A --delta D [--partition P] [--out FILE]
                                          export a plot-ready accuracy table
"""
from __future__ import annotations

import argparse
import sys

from .expconfig import ConfigError, parse_experiment_file
from .runner import config_hash, emit_plot_series, run_from_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzsim", description="Byzantine-robust distributed-SGD simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the (rule x attack x seed) grid from a config file")
    run_p.add_argument("config", help="path to the experiment file")
    run_p.add_argument("--out", default="results", help="output directory (default: results)")

    val_p = sub.add_parser("validate", help="check a config file without running anything")
    val_p.add_argument("config", help="path to the experiment file")

    plot_p = sub.add_parser("plot", help="emit a round-vs-accuracy table from a metrics CSV")
    plot_p.add_argument("csv", help="path to metrics.csv")
    plot_p.add_argument("--attack", required=True, help="attack id to select")
    plot_p.add_argument("--delta", required=True, type=float, help="byzantine fraction to select")
    plot_p.add_argument("--partition", default=None, help="partition descriptor to select (optional)")
    plot_p.add_argument("--out", default=None, help="write the table here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "run":
        return run_from_config(args.config, args.out)

    if args.command == "validate":
        try:
            exp = parse_experiment_file(args.config)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        cells = len(exp.grid())
        print(f"ok: {cells} runs ({len(exp.rules)} rules x {len(exp.attacks)} attacks x {len(exp.seeds)} seeds), "
              f"output key {config_hash(exp)}")
        return 0

    if args.command == "plot":
        try:
            text = emit_plot_series(args.csv, args.attack, args.delta, args.partition, args.out)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if args.out is None:
            sys.stdout.write(text)
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
