"""Command-line front end.

    ssnscope <scenario> [--config FILE] [--seed N] [--out DIR]
                        [--plot | --no-plot] [--workers N]

Scenarios: figure1, calibrate, scan, variance, target.  Flags override config
file values; every run writes its resolved configuration to
``<out>/manifest.txt``, and passing a manifest back as ``--config`` reproduces
the run exactly.

Exit codes: 0 success, 2 configuration error, 3 runtime estimation failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, EstimationError, ParameterError
from .scenarios import SCENARIOS, load_config, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssnscope",
        description="Desk-scale twin-beam sub-shot-noise microscope simulator")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", help="flat key = value configuration file "
                                        "(a manifest.txt also works)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", default=None,
                       help="output directory (default: out-<scenario>)")
        p.add_argument("--plot", dest="plot", action="store_true",
                       default=None, help="render PNG figures (default)")
        p.add_argument("--no-plot", dest="plot", action="store_false",
                       help="skip figure rendering")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel workers for scans")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out or f"out-{args.scenario}"
    try:
        config = load_config(args.scenario, args.config,
                             overrides={"seed": args.seed, "plot": args.plot,
                                        "workers": args.workers})
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_scenario(config, out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimationError, ParameterError) as exc:
        print(f"estimation failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    for label, path in sorted(result["outputs"].items()):
        print(f"{label}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
