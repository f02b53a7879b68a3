"""`train`: fit one model family on a dataset and save it with its loss log."""
import argparse
import logging
from pathlib import Path

import numpy as np

from ..fae import autoencoder, storage
from ..fae.evaluation import parameter_count, train_model
from ..fae.schemas import FaeConfig, FpcaConfig, ModelKind
from .common import command_echo, load_config_file

logger = logging.getLogger(__name__)

WEIGHT_GRID_SIZE = 201


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="train an fae, ae or fpca model")
    parser.add_argument("model", choices=[kind.value for kind in ModelKind])
    parser.add_argument("--data", required=True, help="long-format dataset CSV")
    parser.add_argument("--config", help="model config JSON (defaults used when omitted)")
    parser.add_argument("--out", required=True, help="model JSON path")
    parser.add_argument("--components", type=int, help="fpca: number of components")
    parser.add_argument("--lambda", dest="lam", type=float, help="fae: roughness penalty")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--seed", type=int)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    overrides = {"num_components": args.components}
    if args.model != ModelKind.FPCA.value:
        overrides = {"lambda": args.lam if args.model == ModelKind.FAE.value else None,
                     "epochs": args.epochs, "seed": args.seed}
    config = load_config_file(args.config, model=args.model, overrides=overrides)

    dataset = storage.read_dataset_csv(args.data)
    model, history = train_model(dataset, config)

    out = Path(args.out)
    metadata = {
        "dataset": str(args.data),
        "n_samples": len(dataset),
        "parameter_count": parameter_count(model),
        "final_loss": history[-1] if history else None,
        "command": command_echo(args),
    }
    storage.save_model(model, out, metadata)
    if history:
        storage.write_loss_log(history, out.with_suffix(".loss.txt"))

    if isinstance(config, FaeConfig):
        for side, basis, weights in (
            ("input", config.input_basis, autoencoder.input_weight_functions),
            ("output", config.output_basis, autoencoder.output_weight_functions),
        ):
            times = np.linspace(basis.t_min, basis.t_max, WEIGHT_GRID_SIZE)
            storage.write_weight_functions_csv(
                times, {f"{side}_weight": weights(model, times)}, out.with_name(f"{out.stem}_{side}_weights.csv"),
            )

    if isinstance(config, FpcaConfig):
        print(f"fpca eigenvalues: {', '.join(f'{v:.6g}' for v in model.eigenvalues)}")
    else:
        print(f"final training loss: {history[-1]:.6g}")
    return 0
