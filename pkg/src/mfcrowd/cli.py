"""Command-line entry point.

    mfcrowd run <config.toml> --out <dir> [--arm local|nonlocal|both]
        [--particles] [--override-convexity] [--seed <u64>]

Exit codes: 0 success, 1 configuration error, 2 line-search stall (partial
artifacts are kept), 3 convexity violation without --override-convexity.
The environment variable MFCROWD_THREADS caps the compiled kernels' thread
count.  No numerics live here; the command is composition only.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import parse_config
from .errors import ConvexityError, MFCrowdError
from .experiment import ARMS, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfcrowd",
        description="Mean-field crowd-aversion control: solve, validate, export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser(
        "run",
        help="optimize the configured problem and write CSV/JSON artifacts",
    )
    run.add_argument("config", help="TOML experiment file")
    run.add_argument("--out", required=True, help="output directory (created if missing)")
    run.add_argument(
        "--arm",
        choices=("local", "nonlocal", "both"),
        default="both",
        help="which kernel arm(s) to optimize (default: both)",
    )
    run.add_argument(
        "--particles",
        action="store_true",
        help="run the N-particle validation ladder after optimizing",
    )
    run.add_argument(
        "--override-convexity",
        action="store_true",
        help="proceed even if the convexity check reports a violation",
    )
    run.add_argument(
        "--seed",
        type=int,
        default=None,
        metavar="U64",
        help="replace the config's RNG seed",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        problem = parse_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
                return 1
            problem = problem.with_seed(args.seed)
        arms = ARMS if args.arm == "both" else (args.arm,)
        summary = run_experiment(
            problem,
            args.out,
            arms=arms,
            particles=args.particles,
            override_convexity=args.override_convexity,
        )
    except ConvexityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("rerun with --override-convexity to proceed anyway", file=sys.stderr)
        return 3
    except MFCrowdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if summary.stalled:
        print("warning: line search stalled; artifacts hold the best iterate", file=sys.stderr)
        return 2
    print(f"wrote {summary.out_dir / 'summary.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
