"""Command-line front end: ``affinelab <command> [options]``.

Exit codes: 0 all checks within tolerance, 1 violation found, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .catalog import catalog_get, catalog_names
from .report import (
    ConfigError,
    RunConfig,
    dumps,
    invariants_csv,
    parallel_csv,
    parse_grid,
    parse_mu,
    parse_tol,
    validate_report,
)
from .runner import COMMANDS, run


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="affinelab", description="Equiaffine invariants, parallel families and isoparametric checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--surface", help='catalog name, e.g. "sphere(1)", or "custom:<expr>"')
        s.add_argument("--grid", help='e.g. "5x5" or "5x5@[-0.3,0.3]x[-0.3,0.3]"')
        s.add_argument("--mu", help="comma separated mu values")
        s.add_argument("--order", type=int, help="jet order (4..10)")
        s.add_argument("--tol", help='loose tolerance, or "tight=..,loose=..,gray=.."')
        s.add_argument("--out", help="report path (stdout if omitted)")
        s.add_argument("--format", choices=("json", "csv"))
        s.add_argument("--jobs", type=int, help="worker processes")
        s.add_argument("--config", help="JSON file mirroring the run configuration")
    sub.add_parser("catalog", help="list surfaces")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = RunConfig.from_json(doc)
    else:
        cfg = RunConfig()
    cfg.command = args.command
    if args.surface is not None:
        cfg.surface = args.surface
    if args.grid is not None:
        cfg.grid = parse_grid(args.grid)
    if args.mu is not None:
        cfg.mu_values = parse_mu(args.mu)
    if args.order is not None:
        cfg.jet_order = args.order
    if args.tol is not None:
        cfg.tolerances = {**cfg.tolerances, **parse_tol(args.tol)}
    if args.out is not None:
        cfg.output = args.out
    if args.format is not None:
        cfg.format = args.format
    if args.jobs is not None:
        cfg.jobs = args.jobs
    return cfg


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return dumps(report)
    n = catalog_get(report["surface"]).n
    if report["command"] == "parallel":
        return parallel_csv(report["parallel"], n)
    if report["samples"]:
        return invariants_csv(report["samples"], n)
    raise ConfigError(f"csv output is not available for {report['command']!r}")


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "catalog":
            for name in catalog_names():
                print(name)
            return 0
        cfg = config_from_args(args)
        report, code = run(cfg)
        validate_report(json.loads(dumps(report)))
        text = render(report, cfg.format)
    except ConfigError as exc:
        print(f"affinelab: error: {exc}", file=sys.stderr)
        return 2
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    for v in report["violations"][:20]:
        print(f"violation: {v}", file=sys.stderr)
    if report["verdict"] is not None:
        print(f"verdict: {report['verdict']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
