"""`smooth`: evaluate a saved model's fitted curves on a chosen grid."""
import argparse
import logging

from ..fae import storage
from ..fae.data import uncenter_values
from ..fae.errors import ArgumentError
from ..fae.evaluation import curves
from .common import parse_grid

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("smooth", help="write fitted curves on an evaluation grid")
    parser.add_argument("--model", required=True, help="saved model JSON")
    parser.add_argument("--data", required=True, help="long-format dataset CSV")
    parser.add_argument("--grid", default="observed", help="observed | START:STOP:NUM | refine:K")
    parser.add_argument("--uncenter", action="store_true", help="add back the mean curve stored by ingest --center")
    parser.add_argument("--out", required=True, help="curves CSV (sample_id, t, value)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    model = storage.load_model(args.model)
    dataset = storage.read_dataset_csv(args.data)
    grid = parse_grid(args.grid, dataset)
    fitted = curves(model, dataset, grid)

    if args.uncenter:
        mean = storage.read_mean_curve(args.data)
        if mean is None:
            raise ArgumentError(f"{args.data} has no stored mean curve; ingest it with --center first")
        fitted = uncenter_values(grid, fitted, mean)

    path = storage.write_curves_csv(dataset, grid, fitted, args.out)
    print(f"wrote {len(dataset)} curves x {grid.size} points to {path}")
    return 0
