"""
FAE Toolkit - Command Line Entry Point

Functional autoencoders, FPCA and classic AE baselines for discretely
observed functional data.

    python -m src.cli simulate --preset S1_1 --out data/
    python -m src.cli ingest raw.csv --center --out data/elnino.csv
    python -m src.cli train fae --data data/S1_1.csv --config cfg.json --out models/fae.json
    python -m src.cli evaluate --config cfg.json --data data/S1_1.csv --replicates 10 --out reports/
    python -m src.cli smooth --model models/fae.json --data data/S1_1.csv --grid refine:10 --out curves.csv

Exit codes: 0 success, 2 usage/config/data errors, 3 numerical failures.
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from .config import get_settings
from .commands import evaluate, ingest, simulate, smooth, train
from .fae.errors import FaeError, NumericalError

settings = get_settings()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fae",
        description="Functional autoencoders for discretely observed functional data",
    )
    parser.add_argument("--log-level", default=settings.log_level, help="logging level (default: %(default)s)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (simulate, ingest, train, evaluate, smooth):
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))
    try:
        return args.handler(args)
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FaeError, ValidationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
