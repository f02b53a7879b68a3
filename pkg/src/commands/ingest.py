"""`ingest`: validate a long-format CSV, optionally center it, and re-export it."""
import argparse
import logging

from ..fae import storage
from ..fae.data import center, pointwise_mean
from .common import command_echo

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("ingest", help="load a long-format CSV (sample_id, t, value[, label])")
    parser.add_argument("csv", help="input CSV")
    parser.add_argument("--center", action="store_true", help="subtract the pointwise sample mean curve")
    parser.add_argument("--out", required=True, help="output CSV; a .json sidecar is written next to it")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    dataset = storage.read_dataset_csv(args.csv)
    mean = None
    if args.center:
        mean = pointwise_mean(dataset)
        dataset = center(dataset, mean)
        logger.info(f"Centered {len(dataset)} samples on {mean.times.size} distinct timestamps")

    csv_path = storage.write_dataset_csv(dataset, args.out)
    labels = dataset.labels
    storage.write_json({
        "source": str(args.csv),
        "centered": bool(args.center),
        "mean_curve": None if mean is None else mean.to_dict(),
        "n_samples": len(dataset),
        "n_observations": dataset.num_observations,
        "regular_grid": dataset.is_regular,
        "classes": None if labels is None else sorted(set(labels.tolist())),
        "command": command_echo(args),
    }, storage.sidecar_path(csv_path))
    print(f"ingested {len(dataset)} samples into {csv_path}")
    return 0
