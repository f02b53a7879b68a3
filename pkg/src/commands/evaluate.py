"""`evaluate`: repeated random-split experiments with report and curve outputs."""
import argparse
import logging
from pathlib import Path

import numpy as np

from ..config import get_settings
from ..fae import storage
from ..fae.baseline_ae import AeModel
from ..fae.data import center, pointwise_mean
from ..fae.evaluation import ExperimentRunner, curves, replicate_seeds, select_lambda, split
from ..fae.errors import ArgumentError
from ..fae.schemas import FaeConfig, parse_model_config
from .common import command_echo, load_config_file, output_dir, parse_float_list, parse_grid, parse_int_list

settings = get_settings()
logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="run the split -> train -> score protocol")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", action="append", help="model config JSON (repeatable)")
    source.add_argument("--model", action="append", help="saved model whose config is re-trained (repeatable)")
    parser.add_argument("--data", required=True, help="long-format dataset CSV")
    parser.add_argument("--train-fraction", type=float, default=0.8)
    parser.add_argument("--replicates", type=int, default=10)
    parser.add_argument("--seed", type=int, default=settings.seed, help="master seed")
    parser.add_argument("--center", action="store_true", help="center on the training mean curve per replicate")
    parser.add_argument("--checkpoints", help="comma-separated epochs at which to record test metrics")
    parser.add_argument("--jobs", type=int, default=settings.jobs, help="replicates run in parallel")
    parser.add_argument("--grid", default="observed", help="curve grid: observed | START:STOP:NUM | refine:K")
    parser.add_argument("--select-lambda", help="fae: comma-separated lambda candidates chosen by K-fold CV")
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--out", help="output directory")
    parser.set_defaults(handler=run)


def _configs(args: argparse.Namespace):
    if args.config:
        for path in args.config:
            yield Path(path).stem, load_config_file(path)
    else:
        for path in args.model:
            payload = storage.read_json(path)
            if "config" not in payload:
                raise ArgumentError(f"{path} is not a saved model file")
            yield Path(path).stem, parse_model_config(payload["config"])


def run(args: argparse.Namespace) -> int:
    dataset = storage.read_dataset_csv(args.data)
    out = output_dir(args.out)
    lambdas = parse_float_list(args.select_lambda)

    for label, config in _configs(args):
        if lambdas and isinstance(config, FaeConfig):
            selection = select_lambda(dataset, config, lambdas, folds=args.folds, seed=args.seed)
            storage.write_json(selection.model_dump(mode="json"), out / f"{label}_lambda.json")
            config = config.model_copy(update={"lam": selection.best})
            logger.info(f"{label}: selected lambda={selection.best}")

        runner = ExperimentRunner(
            dataset, config,
            train_fraction=args.train_fraction,
            replicates=args.replicates,
            seed=args.seed,
            centered=args.center,
            checkpoints=parse_int_list(args.checkpoints),
            jobs=args.jobs,
        )
        report = runner.run()
        report.command = command_echo(args)
        storage.write_report(report, out / f"{label}_report.json", out / f"{label}_report.csv")

        # Curves of the first replicate's test set, on the original scale
        model = runner.models[0]
        parts = split(dataset, args.train_fraction, replicate_seeds(args.seed, args.replicates)[0])
        test_set = dataset.subset(parts.test)
        grid = model.grid if isinstance(model, AeModel) else parse_grid(args.grid, dataset)
        offset = np.zeros(grid.size)
        if args.center:
            mean = pointwise_mean(dataset.subset(parts.train))
            test_set = center(test_set, mean)
            offset = mean.at(grid)
        storage.write_curves_csv(test_set, grid, curves(model, test_set, grid) + offset, out / f"{label}_curves.csv")

        summary = report.summary
        accuracy = summary["p_classification"].mean
        print(
            f"{label}: mse_p {summary['mse_p'].mean:.6g} (sd {summary['mse_p'].sd})"
            + ("" if accuracy is None else f", p_classification {accuracy:.4f} (sd {summary['p_classification'].sd})")
        )
    return 0
