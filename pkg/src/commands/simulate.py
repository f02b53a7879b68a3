"""`simulate`: write a synthetic scenario dataset plus its replay sidecar."""
import argparse
import logging

from ..fae import simgen, storage
from ..fae.schemas import ScenarioConfig
from .common import command_echo, output_dir

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="generate a synthetic functional dataset")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=sorted(simgen.SCENARIO_PRESETS), help="named scenario")
    source.add_argument("--config", help="ScenarioConfig JSON file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--name", help="file stem (default: preset name or 'scenario')")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--n-samples", type=int, help="override the number of curves")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.n_samples is not None:
        overrides["n_samples"] = args.n_samples

    if args.preset:
        config = simgen.preset(args.preset, **overrides)
    else:
        payload = storage.read_json(args.config)
        payload.pop("schema_version", None)
        payload.update(overrides)
        config = ScenarioConfig.model_validate(payload)

    data = simgen.generate(config)
    stem = args.name or (config.name or "scenario")
    csv_path = storage.write_dataset_csv(data.dataset, output_dir(args.out) / f"{stem}.csv")
    sidecar = data.sidecar()
    sidecar["command"] = command_echo(args)
    storage.write_json(sidecar, storage.sidecar_path(csv_path))
    print(f"wrote {len(data.dataset)} curves to {csv_path}")
    return 0
