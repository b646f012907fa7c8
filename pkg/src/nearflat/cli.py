"""Command-line entry point.

    nearflat <subcommand> --config <file> [--out <dir>] [--dump-every N]

Subcommands: ricci-sim, train, inverse-approx, divergence-check,
curvature-check.  Exit codes: 0 success, 2 configuration error, 3 numerical
degeneracy, 4 singularity verdict.  NEARFLAT_LOG sets the log level.
"""

import argparse
import logging
import os
import sys

from .config import EXPERIMENTS, parse_config
from .errors import ConfigError
from .harness import EXIT_CONFIG, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nearflat", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        if name == "ricci-sim":
            p.add_argument(
                "--dump-every",
                type=int,
                default=None,
                metavar="N",
                help="dump a grid snapshot CSV every N steps",
            )
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("NEARFLAT_LOG", "WARNING").upper())
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.experiment != args.subcommand:
        print(
            f"config error: config is for {cfg.experiment!r}, "
            f"but subcommand is {args.subcommand!r}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    dump_every = getattr(args, "dump_every", None)
    if dump_every is not None and dump_every < 1:
        print("config error: --dump-every must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    manifest, code = run_experiment(cfg, out_dir=args.out, dump_every=dump_every)
    print(f"{cfg.experiment}: {manifest.verdicts}")
    return code


if __name__ == "__main__":
    sys.exit(main())
