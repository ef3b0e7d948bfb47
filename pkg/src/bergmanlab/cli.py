"""Console entry point.

Usage: bergmanlab COMMAND [--config PATH] [--out DIR] [--threads K]
       [--resolution H] [--domain NAME] [--symbol EXPR]

COMMAND is one of: kernel, metric, distance, net, hankel, omega-scan,
decompose, sbg-check, t91, variety, report.  Exit codes: 0 success,
2 config error, 3 symbol parse error, 4 unsupported domain/command
pair, 5 computation failure.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (COMMANDS, ConfigError, EXIT_CONFIG, ExperimentConfig,
                      run)


def build_parser():
    p = argparse.ArgumentParser(
        prog="bergmanlab",
        description="Bergman kernel, metric, and operator experiments "
                    "on model domains.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (flat key-value)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--threads", type=int,
                   help="BLAS thread cap; affects speed only")
    p.add_argument("--resolution", type=float,
                   help="grid spacing override")
    p.add_argument("--domain", help="domain name override")
    p.add_argument("--symbol", help="symbol expression override")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = (ExperimentConfig.from_json(args.config)
                  if args.config else ExperimentConfig())
        if args.out is not None:
            config.out_dir = args.out
        if args.threads is not None:
            config.threads = args.threads
        if args.resolution is not None:
            config.resolution = args.resolution
        if args.domain is not None or args.symbol is not None:
            data = {f: getattr(config, f)
                    for f in config.__dataclass_fields__}
            if args.domain is not None:
                data["domain"] = args.domain
                data["resolution"] = (args.resolution
                                      if args.resolution is not None
                                      else 0.0)
            if args.symbol is not None:
                data["symbol"] = args.symbol
            config = ExperimentConfig(**data)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config, args.command)


if __name__ == "__main__":
    sys.exit(main())
