"""Command line entry point: ``spreadsim <scenario> --config FILE --out DIR``.

Exit codes: 0 success, 1 a checked bound or invariant failed, 2 bad config.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..graph import DisconnectedPlacementError
from . import config as config_mod
from .scenarios import CheckFailure, execute

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spreadsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in config_mod.SCENARIOS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None, help="override the config's worker count")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config)
    except (config_mod.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.scenario != args.scenario:
        print(f"config error: {args.config} describes scenario {cfg.scenario!r}, "
              f"not {args.scenario!r}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers is not None:
        if args.workers < 1:
            print("config error: --workers must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        import dataclasses
        cfg = dataclasses.replace(cfg, workers=args.workers)
    try:
        summary = execute(cfg, args.out)
    except (CheckFailure, DisconnectedPlacementError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    if summary["violations"]:
        for msg in summary["violations"]:
            print(f"violation: {msg}", file=sys.stderr)
        return EXIT_CHECK
    print(f"{cfg.scenario}: {cfg.trials} trial(s) written to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
