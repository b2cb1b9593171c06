"""Command-line entry point: ``run``, ``plots``, ``compare`` and ``adf``.

Exit status is 0 when every (city, model) pair succeeded, 2 when some
failed or were skipped, and 1 on a fatal configuration or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from .harness import ConfigError, ExperimentConfig, compare, emit_plots, exit_code, format_mse_table, run
from .ingest import IngestError
from .stattests import adf_test

log = logging.getLogger("tempcast")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS lets the flags sit before or after the subcommand without the
    # subparser's defaults overwriting a value given up front
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel (city, model) tasks")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="tempcast", parents=[common], description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tempcast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--output", default=None, help="override output_dir")
    r.add_argument("--plots", action="store_true", help="also emit SVG plots")

    pl = sub.add_parser("plots", parents=[common], help="emit SVG plots for a finished run")
    pl.add_argument("--run", required=True)

    c = sub.add_parser("compare", parents=[common], help="rebuild the comparison table of a run")
    c.add_argument("--run", required=True)

    a = sub.add_parser("adf", parents=[common], help="augmented Dickey-Fuller test on a CSV column")
    a.add_argument("--csv", required=True)
    a.add_argument("--column", required=True)
    a.add_argument("--city", default=None, help="keep rows whose City column matches")
    a.add_argument("--diff", type=int, default=0, help="difference the column this many times first")
    a.add_argument("--max-lag", type=int, default=None)
    return p


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.output is not None:
        cfg.output_dir = args.output
    manifest = run(cfg)
    for e in manifest["entries"]:
        detail = f"  ({e['reason']})" if e["reason"] else ""
        print(f"{e['city']:<20} {e['model']:<8} {e['status']}{detail}")
    if args.plots and any(e["status"] == "success" for e in manifest["entries"]):
        emit_plots(cfg.output_dir)
    return exit_code(manifest)


def _cmd_compare(args) -> int:
    result = compare(args.run)
    for entry in result["table"]:
        print(format_mse_table(entry))
        print("ranking:", ", ".join(entry["ranking"]))
    return 0


def _cmd_plots(args) -> int:
    for path in emit_plots(args.run):
        print(path)
    return 0


def _read_column(path, column, city):
    values = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if column not in (reader.fieldnames or []):
            raise IngestError(f"column {column!r} not in {path}")
        if city is not None and "City" not in reader.fieldnames:
            raise IngestError(f"--city given but {path} has no City column")
        for row in reader:
            if city is not None and row["City"].strip() != city:
                continue
            cell = row[column].strip()
            if cell:
                values.append(float(cell))
    return np.asarray(values)


def _cmd_adf(args) -> int:
    y = _read_column(args.csv, args.column, args.city)
    if args.diff:
        y = np.diff(y, n=args.diff)
    res = adf_test(y, args.max_lag)
    print(
        json.dumps(
            {
                "statistic": res.statistic,
                "lags_used": res.lags_used,
                "n_obs": res.n_obs,
                "critical_values": res.critical_values,
                "stationary_at_5pct": res.is_stationary_5pct,
            },
            indent=2,
        )
    )
    return 0


COMMANDS = {"run": _cmd_run, "plots": _cmd_plots, "compare": _cmd_compare, "adf": _cmd_adf}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    for name, default in (("seed", None), ("jobs", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, IngestError, OSError, ValueError) as exc:
        print(f"tempcast: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
