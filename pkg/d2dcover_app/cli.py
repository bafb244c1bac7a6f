from __future__ import annotations

import argparse
from typing import Sequence

from .presets import PRESETS


def _add_run_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Root seed for every random stream (overrides [simulation] seed).",
    )
    parser.add_argument(
        "--iterations",
        type=int,
        default=None,
        help="Monte Carlo iterations per curve (overrides [simulation] iterations; default: 10000).",
    )
    parser.add_argument(
        "--output-dir",
        default=None,
        help="Directory for CSV curves, manifest.json and run.log (default: results).",
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker threads for sweeps and Monte Carlo chunks (default: 1).",
    )
    parser.add_argument(
        "--db-path",
        default=None,
        help="SQLite database file for run history (default: d2dcover.db).",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2dcover",
        description=(
            "Evaluate and simulate SINR and rate coverage of D2D links that switch "
            "between a millimeter-wave and a microwave band."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    run = sub.add_parser("run", help="Run the sweeps described by a config file or a manifest.json.")
    run.add_argument("config", help="INI config file, or a manifest.json written by an earlier run.")
    _add_run_overrides(run)

    validate = sub.add_parser("validate", help="Check a config and print derived quantities without running.")
    validate.add_argument("config", nargs="?", default=None, help="INI config file (default: built-in defaults).")
    _add_run_overrides(validate)

    preset = sub.add_parser("preset", help="Reproduce the curves of one figure.")
    preset.add_argument("name", choices=PRESETS, help="Figure preset.")
    preset.add_argument("--config", default=None, help="Optional INI file overriding the built-in defaults.")
    _add_run_overrides(preset)

    check = sub.add_parser("check", help="Compute the acceptance criteria and write acceptance.json.")
    check.add_argument("--config", default=None, help="Optional INI file overriding the built-in defaults.")
    check.add_argument(
        "--strict",
        action="store_true",
        help="Exit with status 1 when any criterion fails (default: report only).",
    )
    _add_run_overrides(check)

    history = sub.add_parser("history", help="List recent runs from the history database.")
    history.add_argument("--db-path", default="d2dcover.db", help="SQLite database file (default: d2dcover.db).")
    history.add_argument("--limit", type=int, default=20, help="Number of runs to list (default: 20).")

    realization = sub.add_parser("realization", help="Dump one sampled network realization as CSV.")
    realization.add_argument("--config", default=None, help="Optional INI file overriding the built-in defaults.")
    realization.add_argument(
        "--window-m",
        type=float,
        default=500.0,
        help="Half-width of the dumped window around the test receiver in meters (default: 500).",
    )
    _add_run_overrides(realization)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
