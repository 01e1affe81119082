"""Command-line entry point: ``uvlag run``."""

from __future__ import annotations

import argparse
import json
import sys

from .funcmodel import CATALOG
from .suite import REGISTRY, ConfigError, RunConfig, all_as_expected, run

EXIT_OK, EXIT_UNEXPECTED, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uvlag",
                                     description="Verification suite for localized "
                                                 "U-Lagrangians on a fixed problem catalog.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run checks and write a JSON report")
    which = r.add_mutually_exclusive_group()
    which.add_argument("--problem", action="append", choices=sorted(CATALOG),
                       help="catalog problem (repeatable)")
    which.add_argument("--all", action="store_true", help="every catalog problem (default)")
    r.add_argument("--check", action="append", choices=["all", *sorted(REGISTRY)],
                   help="check id or 'all' (repeatable; default all)")
    r.add_argument("--eps", type=float, help="V-ball radius (default: half the feasible max)")
    r.add_argument("--eps-bar", type=float, help="override the catalog eps_bar")
    r.add_argument("--rho", type=float, help="prox-regularity modulus for 'proxreg'")
    r.add_argument("--grid-n", type=int, help="coarse grid size of the inner solver (odd)")
    r.add_argument("--samples", type=int, help="sample count for sampled certificates")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("-o", "--out", help="report path (default: stdout)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    problems = sorted(set(args.problem)) if args.problem else sorted(CATALOG)
    checks = args.check or ["all"]
    checks = sorted(REGISTRY) if "all" in checks else sorted(set(checks))
    return RunConfig(problems=problems, checks=checks, eps=args.eps, eps_bar=args.eps_bar,
                     rho=args.rho, grid_n=args.grid_n, samples=args.samples,
                     seed=args.seed, out=args.out)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = config_from_args(args)
    try:
        report = run(config)
    except ConfigError as exc:
        print(f"uvlag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if config.out:
        try:
            with open(config.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"uvlag: error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    s = report["summary"]
    print(f"uvlag: {s['pass']} pass, {s['fail']} fail, {s['expected_fail']} expected fail",
          file=sys.stderr)
    return EXIT_OK if all_as_expected(report) else EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
