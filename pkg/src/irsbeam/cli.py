"""Command-line entry point: ``irsbeam <sweep> --config file.yaml``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .harness import ConfigError, MethodIntractable, load_spec, run_experiment, write_outputs

log = logging.getLogger("irsbeam")

COMMANDS = {"sweep-power": "power", "sweep-size": "size", "convergence": "convergence",
            "single": "single"}


def _u64(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irsbeam",
                                     description="IRS beamforming experiments under PS-DPC")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment description")
        p.add_argument("--seed", type=_u64, help="override the master seed")
        p.add_argument("--out", help="override the output CSV path")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        spec = load_spec(args.config, COMMANDS[args.command])
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
    except (ConfigError, MethodIntractable, OSError) as exc:
        print(f"irsbeam: {exc}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("irsbeam: --threads must be >= 1", file=sys.stderr)
        return 2
    rows = run_experiment(spec, threads=args.threads)
    for path in write_outputs(spec, rows, args.out):
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
