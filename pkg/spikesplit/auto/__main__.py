import argparse
import sys
from typing import List

from spikesplit.utils.conf import (
    Config,
    load_config_file,
    merge_config,
    parse_overrides,
    parse_value,
)
from spikesplit.frame.report import build_report, read_rows, summary_path_of
from spikesplit.auto.config import generate_experiment_config, SWEEP_AXES
from spikesplit.auto.launcher import run_experiment, sweep, serve_cloud


def _add_config_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, help="JSON experiment config file.")
    parser.add_argument(
        "--conf",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config key, may be repeated.",
    )
    for key, value in generate_experiment_config().items():
        parser.add_argument(
            f"--{key.replace('_', '-')}",
            dest=key,
            type=parse_value,
            default=argparse.SUPPRESS,
            help=f"Config key {key}, default: {value}.",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m spikesplit.auto",
        description="Split edge-cloud spiking network inference benchmarks.",
    )
    subparsers = parser.add_subparsers(dest="command")

    p_run = subparsers.add_parser("run", help="Run one experiment.")
    _add_config_arguments(p_run)

    p_sweep = subparsers.add_parser("sweep", help="Sweep one config key.")
    _add_config_arguments(p_sweep)
    p_sweep.add_argument(
        "--axis", type=str, required=True, choices=sorted(SWEEP_AXES), help="Key to sweep."
    )
    p_sweep.add_argument(
        "--values",
        type=str,
        required=True,
        help="Comma separated values, e.g. 0.5,0.7,0.9",
    )

    p_serve = subparsers.add_parser("serve", help="Run a cloud node.")
    _add_config_arguments(p_serve)

    p_report = subparsers.add_parser(
        "report", help="Rebuild the summary of a per-sample CSV."
    )
    p_report.add_argument(
        "--input", type=str, required=True, help="Per-sample CSV path."
    )
    p_report.add_argument(
        "--output",
        type=str,
        default=None,
        help="Summary CSV path, defaults to <input stem>.summary.csv",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> Config:
    """
    Defaults, then the config file, then ``--conf`` overrides, then
    per key flags.
    """
    config = Config()
    if args.config:
        config = load_config_file(args.config, config)
    config = merge_config(config, parse_overrides(args.conf))
    flags = {
        key: getattr(args, key)
        for key in generate_experiment_config()
        if hasattr(args, key)
    }
    return merge_config(config, flags)


def main(argv: List[str] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "run":
        run_experiment(config_from_args(args))
    elif args.command == "sweep":
        values = [parse_value(v.strip()) for v in args.values.split(",") if v.strip()]
        sweep(args.axis, values, config_from_args(args))
    elif args.command == "serve":
        serve_cloud(config_from_args(args))
    elif args.command == "report":
        report = build_report(read_rows(args.input))
        output = args.output or summary_path_of(args.input)
        with open(output, "w", newline="") as f:
            f.write(report.summary_csv())
        print(report.summary_csv(), end="")
        print(f"Summary saved to {output}", file=sys.stderr)
    else:
        parser.print_help()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
