"""Command-line front end: validation, optimisation and figure-style
experiment runs emitting plot-ready CSV."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ._version import __version__
from .config import ConfigError, load_config
from .sim import EXPERIMENTS, ExperimentResult, run_experiment

__all__ = ["main", "build_parser", "write_result"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdmimo",
        description="Elevation beamforming simulator for planar antenna "
                    "arrays: correlation validation, downtilt optimisation "
                    "and baseline comparisons.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "validate-scf": "closed-form correlation against the Monte Carlo "
                        "oracle over the full lag grid",
        "single-user": "single-user SNR: fixed-tilt sweep and eigenbeamformer",
        "sdb": "single-downtilt max-min optimisation per drop with a "
               "fixed-tilt sweep and the relaxation bound",
        "ugsdb": "user-group-specific downtilt optimisation against the "
                 "ungrouped solver and a clustering baseline",
        "baselines": "solver against fixed-tilt strategies per drop",
        "sweep": "strategy medians swept over the user count",
    }
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name, help=descriptions[name])
        cmd.add_argument("--config", required=True,
                         help="scenario TOML file")
        cmd.add_argument("--output", default="out",
                         help="directory for result CSVs (default: out)")
        cmd.add_argument("--override", action="append", default=[],
                         metavar="KEY=VALUE",
                         help="dotted-key config override, repeatable")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads for independent drops")
        cmd.add_argument("--verbose", action="store_true",
                         help="also emit solver trace tables")
    return parser


def _format(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # np scalars repr with their type name
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_result(result: ExperimentResult, output_dir: str,
                 overrides=()) -> list[str]:
    """Write one CSV per result table, each with a metadata preamble.

    Outputs are byte-identical across reruns of the same configuration.
    """
    os.makedirs(output_dir, exist_ok=True)
    written = []
    for table_name, (columns, rows) in result.tables.items():
        path = os.path.join(output_dir, f"{result.name}_{table_name}.csv")
        with open(path, "w") as fh:
            for key, value in result.metadata.items():
                fh.write(f"# {key}={value}\n")
            for item in overrides:
                fh.write(f"# override {item}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_format(v) for v in row) + "\n")
        written.append(path)
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg, args.command, threads=args.threads,
                                verbose=args.verbose)
        paths = write_result(result, args.output, args.override)
    except Exception as exc:  # runtime failure -> diagnostic + exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
