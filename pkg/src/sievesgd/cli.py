"""Command-line front end.

Subcommands::

    sievesgd run <config> --out DIR [--seed N] [--replications N]
                 [--workers N] [--no-plot]
    sievesgd slope <csv> --n-min N [--field mse|regret]
    sievesgd presets

``<config>`` is either an INI file path or a bare preset name.  Worker count
defaults to the SIEVESGD_WORKERS environment variable.  Exit codes: 0 success,
1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import PRESETS, ConfigError, ExperimentConfig, load_config, parse_config
from .report import (
    read_records_csv,
    rows_to_mean_records,
    write_metadata,
    write_records_csv,
)
from .simulation import aggregate_mean, fit_loglog_slope, run_experiment

logger = logging.getLogger("sievesgd")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit code 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sievesgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV/JSON/figures")
    run.add_argument("config", help="config file path or preset name")
    run.add_argument("--out", default=None, help="output directory (default: from config)")
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument(
        "--replications", type=int, default=None, help="override the replication count"
    )
    run.add_argument(
        "--workers",
        type=int,
        default=int(os.environ.get("SIEVESGD_WORKERS", "1")),
        help="parallel replication workers (env SIEVESGD_WORKERS)",
    )
    run.add_argument(
        "--no-plot", action="store_true", help="skip rendering the figure files"
    )

    slope = sub.add_parser("slope", help="fit a log-log rate line to a run CSV")
    slope.add_argument("csv", help="CSV produced by the run subcommand")
    slope.add_argument("--n-min", type=int, required=True, help="smallest n to include")
    slope.add_argument("--field", choices=("mse", "regret"), default="mse")

    sub.add_parser("presets", help="list the named presets and their settings")
    return parser


def _load_run_config(args) -> ExperimentConfig:
    if args.config in PRESETS and not Path(args.config).exists():
        config = parse_config("", preset=args.config)
    else:
        config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        config = replace(config, **overrides)
    return config


class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def _cmd_run(args) -> int:
    try:
        config = _load_run_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    out_dir = Path(config.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    collector = _WarningCollector()
    logger.addHandler(collector)
    csv_path = out_dir / f"{config.name}.csv"
    meta_path = out_dir / f"{config.name}.meta.json"
    try:
        records = run_experiment(config, workers=max(args.workers, 1))
    except Exception as exc:
        logger.removeHandler(collector)
        write_metadata(meta_path, config, collector.messages, partial=True, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    logger.removeHandler(collector)

    write_records_csv(csv_path, config.name, records)
    write_metadata(meta_path, config, collector.messages)

    if not args.no_plot:
        from .plotting import save_convergence_figure

        reference = -2.0 * config.s / (2.0 * config.s + 1.0)
        save_convergence_figure(
            out_dir / f"{config.name}_mse.png",
            records,
            field="mse",
            reference_slope=reference,
            title=config.name,
        )
        if any(rec.regret is not None for reps in records for rec in reps):
            save_convergence_figure(
                out_dir / f"{config.name}_regret.png",
                records,
                field="regret",
                reference_slope=reference,
                title=f"{config.name} (regret)",
            )

    means = aggregate_mean(records, field="mse")
    final = means[-1]
    n_min = config.slope_n_min
    if n_min is None:
        n_min = max(int(final.n / 10 ** 1.5), 1)
    try:
        slope, _ = fit_loglog_slope(means, n_min)
        slope_text = f"{slope:.4f}"
    except ValueError:
        slope_text = "nan"
    print(f"run_id={config.name} final_n={final.n} mean_mse={final.mse:.6g} "
          f"slope={slope_text} n_min={n_min}")
    print(f"wrote {csv_path} and {meta_path}")
    return EXIT_OK


def _cmd_slope(args) -> int:
    try:
        rows = read_records_csv(args.csv)
        records = rows_to_mean_records(rows, field=args.field)
        slope, intercept = fit_loglog_slope(records, args.n_min, field=args.field)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"slope={slope:.6f} intercept={intercept:.6f} n_min={args.n_min}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    for name, values in PRESETS.items():
        print(name)
        for key in sorted(values):
            print(f"  {key} = {values[key]}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "slope":
        return _cmd_slope(args)
    return _cmd_presets(args)


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
