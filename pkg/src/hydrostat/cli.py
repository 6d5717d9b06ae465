"""Command-line entry point: ``hydrostat <subcommand> --config PATH [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import studies
from .errors import BlowUpError, ConfigError
from .io import DEFAULT_CONFIG_TEXT, RunConfig, load_config, parse_config

SUBCOMMANDS = ("run", "sweep-epsilon", "dependence", "cross-validate", "convergence", "default-config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydrostat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        if name == "default-config":
            continue
        p.add_argument("--config", help="INI configuration file (defaults are used when omitted)")
        p.add_argument("--out", help="output directory (overrides [output] directory)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "run":
            p.add_argument("--resume", metavar="SNAPSHOT", help="continue from a snapshot file")
    return parser


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else parse_config("")
    if args.out:
        config = replace(config, out_dir=args.out)
    return config


def _emit(args, payload: dict) -> None:
    if not args.quiet:
        print(json.dumps(payload, indent=2, sort_keys=True, default=float))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(DEFAULT_CONFIG_TEXT)
        return 0
    try:
        config = _load(args)
        if args.command == "run":
            result = studies.run(config, resume=args.resume, quiet=args.quiet)
            if result.message:
                print(result.message, file=sys.stderr)
            return result.exit_code
        if args.command == "sweep-epsilon":
            rep = studies.epsilon_sweep(config)
            _emit(args, {
                "final_difference": {repr(k): v for k, v in rep.final_difference.items()},
                "sup_H2": {repr(k): v for k, v in rep.sup_H2.items()},
                "differences_decrease": rep.differences_decrease,
                "sup_H2_spread": rep.sup_H2_spread,
                "failures": {repr(k): v for k, v in rep.failures.items()},
            })
            return studies.EXIT_BLOWUP if rep.failures else studies.EXIT_OK
        if args.command == "dependence":
            rep = studies.dependence_study(config)
            _emit(args, {
                "passed": rep.passed,
                "scaling_ratio": rep.scaling_ratio,
                "final_difference": {repr(k): v for k, v in rep.final_difference.items()},
            })
            return studies.EXIT_OK
        if args.command == "cross-validate":
            rep = studies.cross_validate(config)
            _emit(args, {"rel_v": rep.rel_v, "rel_T": rep.rel_T, "rel_w": rep.rel_w})
            return studies.EXIT_OK
        rep = studies.convergence(config)
        _emit(args, {
            "spatial_error": rep.spatial_error,
            "orders_of_magnitude": rep.orders_of_magnitude,
            "temporal_error": {repr(k): v for k, v in rep.temporal_error.items()},
            "temporal_ratios": rep.temporal_ratios,
        })
        return studies.EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return studies.EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return studies.EXIT_BLOWUP
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return studies.EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
