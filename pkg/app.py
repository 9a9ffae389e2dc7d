#!/usr/bin/env python3
import argparse
import sys

from aws_lambda_powertools import Logger
from pydantic import ValidationError

import constants
from components.errors import MagTVError
from components.pipeline import (
    RunConfig,
    certify_measure,
    generate_scenario,
    lambda_sweep,
    load_config,
    run_inversion,
    standard_scenario,
    with_overrides,
)

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magtv",
        description="TV-regularized inversion of magnetic field data for sparse dipole magnetizations.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (standard scenario when omitted)")
    common.add_argument("--seed", type=int, help="Override the scenario seed")
    common.add_argument("--output", help="Override the output directory")
    common.add_argument("--lambda-ratio", type=float, dest="lambda_ratio", help="Single lambda as a fraction of lambda_max")
    common.add_argument("--lambda", type=float, dest="lam", help="Single absolute lambda")
    common.add_argument("--levels", type=int, help="Override the number of refinement levels")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("generate", parents=[common], help="Write truth, sensor and field files of the scenario")
    commands.add_parser("invert", parents=[common], help="Invert on the finest grid of the plan")
    commands.add_parser("refine", parents=[common], help="Invert on every level of the nested grid sequence")
    commands.add_parser("sweep", parents=[common], help="Regularization path over the configured lambdas")
    certify = commands.add_parser("certify", parents=[common], help="Check the optimality certificate of a measure file")
    certify.add_argument("measure", help="Measure CSV (x,y,z,mx,my,mz)")
    certify.add_argument("--tol", type=float, help="Certificate tolerance relative to lambda/2")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig(scenario=standard_scenario())
    return with_overrides(
        cfg,
        seed=args.seed,
        output=args.output,
        lambda_ratio=args.lambda_ratio,
        lam=args.lam,
        levels=args.levels,
    )


def run(args) -> list:
    cfg = resolve_config(args)
    if args.command == "generate":
        if cfg.scenario is None:
            raise MagTVError("generate needs a configuration with a scenario")
        files = generate_scenario(cfg.scenario, cfg.output_dir)
        print(f"Scenario written to {files.manifest.parent}")
        return []
    if args.command == "certify":
        report = certify_measure(cfg, args.measure, tol=args.tol)
        print(f"passed={str(report.passed).lower()} gap={report.gap:.3e} active={report.active_count}")
        return [] if report.passed else [f"certificate failed with gap {report.gap:.3e}"]
    if args.command == "sweep":
        result = lambda_sweep(cfg)
    else:
        result = run_inversion(cfg, single_level=args.command == "invert")
    print(f"Results written to {result.output_dir}")
    return result.warnings


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        warnings = run(args)
    except (MagTVError, OSError, ValidationError) as e:
        LOGGER.error("Run failed", extra={"command": args.command, "error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return 1
    for message in warnings:
        print(f"warning: {message}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
