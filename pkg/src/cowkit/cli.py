"""Command-line interface.

cowkit rates|bounds|multipoint|budget --config <file> [--sweep <file>]
    --out <path> [--seed <u64>]

Exit codes: 0 success, 2 config/validation error, 3 QBER threshold
exceeded (report still written), 4 internal error. COWKIT_THREADS caps
the sweep worker pool.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .commands import cmd_bounds, cmd_budget, cmd_multipoint, cmd_rates, write_csv
from .config import load_bounds_spec, load_experiment_config, load_multipoint_config, load_sweep_spec
from .errors import ConfigError, CowkitError, ParameterError, QberThresholdError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cowkit", description="COW QKD link simulator and bound sweeper")
    sub = parser.add_subparsers(dest="command", required=True)

    rates = sub.add_parser("rates", help="single/dual session sweep to CSV")
    rates.add_argument("--config", required=True)
    rates.add_argument("--sweep", required=True)
    rates.add_argument("--out", required=True)
    rates.add_argument("--seed", type=int, default=None)
    rates.add_argument("--format", choices=["csv"], default="csv")

    bounds = sub.add_parser("bounds", help="security-bound distance sweep to CSV")
    bounds.add_argument("--config", required=True)
    bounds.add_argument("--out", required=True)
    bounds.add_argument("--seed", type=int, default=None)
    bounds.add_argument("--format", choices=["csv"], default="csv")

    multipoint = sub.add_parser("multipoint", help="segment-chained network run to a JSON report")
    multipoint.add_argument("--config", required=True)
    multipoint.add_argument("--out", required=True)
    multipoint.add_argument("--seed", type=int, default=None)

    budget = sub.add_parser("budget", help="power and loss budget report")
    budget.add_argument("--config", required=True)
    budget.add_argument("--spool-km", type=float, default=None)
    budget.add_argument("--out", default=None)
    budget.add_argument("--seed", type=int, default=None)
    return parser


def _run(args: argparse.Namespace) -> int:
    if args.command == "rates":
        config = load_experiment_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        header, rows = cmd_rates(config, load_sweep_spec(args.sweep))
        write_csv(args.out, header, rows)
        return 0
    if args.command == "bounds":
        header, rows = cmd_bounds(load_bounds_spec(args.config))
        write_csv(args.out, header, rows)
        return 0
    if args.command == "multipoint":
        config, topology = load_multipoint_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        report = cmd_multipoint(config, topology)
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        flagged = report.flagged_links()
        if flagged:
            names = ", ".join(f"{link.alice}-{link.bob}" for link in flagged)
            raise QberThresholdError(f"QBER threshold exceeded on link(s): {names}")
        return 0
    if args.command == "budget":
        config = load_experiment_config(args.config)
        report = cmd_budget(config.source, config.channel, spool_km=args.spool_km)
        text = "\n".join(report.lines()) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        sys.stdout.write(text)
        return 0
    raise CowkitError(f"unhandled command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QberThresholdError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        return 3
    except CowkitError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
